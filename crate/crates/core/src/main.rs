fn main() {
    std::process::exit(social_bigat::cli::cli_main(std::env::args_os()));
}
