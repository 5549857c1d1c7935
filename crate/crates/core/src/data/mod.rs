//! Track files, window extraction, hold-one-out splits and synthetic scenes.

mod split;
mod synth;
mod tracks;
mod windows;

pub use split::{hold_one_out_split, load_scene_file, DatasetSplit, SplitManifest, SCENE_NAMES};
pub use synth::{
    lateral_offset, passing_side, social_forces_rollout, synth_generate, PassingSide, SocialForceParams, SynthKind,
    SynthOutput, SynthSpec, FRAMES_PER_SCENE, FRAME_STEP, IDS_PER_SCENE, MIDPOINT,
};
pub use tracks::{format_tracks, load_tracks, parse_tracks, RawTrackRow};
pub use windows::{build_windows, frame_step, to_displacements, WINDOW_LEN};
