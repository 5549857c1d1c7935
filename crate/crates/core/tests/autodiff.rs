use proptest::prelude::*;
use social_bigat::autodiff::{gradient_check, read_checkpoint, write_checkpoint, Graph, ParameterStore, Tensor, Value};
use social_bigat::Result;

const TOL: f64 = 1e-5;
const STEP: f64 = 1e-5;

fn weights(n: usize) -> Tensor<f64> {
    Tensor::new(vec![n], (0..n).map(|i| 0.3 + 0.17 * i as f64).collect()).unwrap()
}

/// Weighted sum of `y`, so every output coordinate contributes a distinct slope.
fn contract<'g>(y: Value<'g, f64>) -> Result<Value<'g, f64>> {
    let n = y.shape().iter().product();
    let w = y.graph().constant(weights(n).reshaped(y.shape())?);
    y.mul(w)?.sum_all()
}

fn check(point: &[f64], shape: &[usize], f: impl for<'g> Fn(Value<'g, f64>) -> Result<Value<'g, f64>>) {
    let x = Tensor::new(shape.to_vec(), point.to_vec()).unwrap();
    let report = gradient_check(|_, v| contract(f(v)?), &x, STEP, TOL).unwrap();
    assert!(report.passed(), "{report:?}");
}

fn away_from_zero(v: &[f64]) -> bool {
    v.iter().all(|x| x.abs() > 1e-3)
}

fn distinct(v: &[f64]) -> bool {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).all(|w| w[1] - w[0] > 1e-3)
}

fn entries(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn smooth_unary_ops(x in entries(6)) {
        check(&x, &[2, 3], |v| v.exp());
        check(&x, &[2, 3], |v| v.tanh());
        check(&x, &[2, 3], |v| v.sigmoid());
        check(&x, &[2, 3], |v| v.softplus());
        check(&x, &[2, 3], |v| v.square());
        check(&x, &[2, 3], |v| v.softmax(1));
        check(&x, &[2, 3], |v| v.softmax(0));
        check(&x, &[2, 3], |v| v.scale(-1.5)?.neg()?.offset(0.25));
        check(&x, &[2, 3], |v| v.l2_norm(1));
        check(&x, &[2, 3], |v| v.sum(0));
        check(&x, &[2, 3], |v| v.transpose());
        check(&x, &[2, 3], |v| v.reshape(&[3, 2])?.slice(0, 1, 3));
        check(&x, &[2, 3], |v| v.gather_rows(&[1, 0, 1]));
        check(&x, &[2, 3], |v| v.broadcast(2));
        check(&x, &[2, 3], |v| Value::concat(&[v, v.exp()?], 1));
        check(&x, &[2, 3], |v| v.mean_all());
        let pos: Vec<f64> = x.iter().map(|a| a.abs() + 0.5).collect();
        check(&pos, &[2, 3], |v| v.log());
    }

    #[test]
    fn kinked_unary_ops(x in entries(6)) {
        prop_assume!(away_from_zero(&x));
        check(&x, &[2, 3], |v| v.relu());
        check(&x, &[2, 3], |v| v.leaky_relu(0.2));
        check(&x, &[2, 3], |v| v.elu());
        check(&x, &[2, 3], |v| v.l1_norm(1));
    }

    #[test]
    fn reductions_with_ties_avoided(x in entries(6)) {
        prop_assume!(distinct(&x));
        check(&x, &[2, 3], |v| v.max(0));
        check(&x, &[2, 3], |v| v.max(1));
        check(&x, &[2, 3], |v| v.min(1));
    }

    #[test]
    fn binary_ops(x in entries(6), y in entries(6)) {
        let g_y = Tensor::new(vec![2, 3], y.clone()).unwrap();
        let row = Tensor::new(vec![3], y[..3].to_vec()).unwrap();
        let rhs = Tensor::new(vec![3, 2], y.clone()).unwrap();
        let a = g_y.clone();
        check(&x, &[2, 3], move |v| v.add(v.graph().constant(a.clone())));
        let a = g_y.clone();
        check(&x, &[2, 3], move |v| v.sub(v.graph().constant(a.clone())));
        let a = g_y.clone();
        check(&x, &[2, 3], move |v| v.mul(v.graph().constant(a.clone())));
        let r = row.clone();
        check(&x, &[2, 3], move |v| v.add(v.graph().constant(r.clone())));
        let r = rhs.clone();
        check(&x, &[2, 3], move |v| v.matmul(v.graph().constant(r.clone())));
        let r = rhs.clone();
        check(&x, &[2, 3], move |v| v.matmul_canonical(v.graph().constant(r.clone())));
        // gradient with respect to the right operand
        let l = g_y.clone();
        check(&x, &[3, 2], move |v| v.graph().constant(l.clone()).matmul(v));
        check(&x, &[2, 3], |v| v.mul(v));
    }

    #[test]
    fn softmax_rows_are_distributions(x in prop::collection::vec(-30.0..30.0f64, 12)) {
        let g = Graph::new();
        let s = g.constant(Tensor::new(vec![3, 4], x).unwrap()).softmax(1).unwrap().to_vec();
        for row in s.chunks(4) {
            prop_assert!(row.iter().all(|&p| p >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn forward_and_backward_are_deterministic(x in entries(6)) {
        let run = || {
            let g = Graph::new();
            let v = g.variable(Tensor::new(vec![2, 3], x.clone()).unwrap());
            let y = v.tanh().unwrap().softmax(1).unwrap().mul(v).unwrap().sum_all().unwrap();
            y.backward().unwrap();
            (y.item().to_bits(), v.grad().unwrap().data().iter().map(|a| a.to_bits()).collect::<Vec<_>>())
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn checkpoint_round_trips(vals in prop::collection::vec(-1e6..1e6f64, 1..20)) {
        let mut store = ParameterStore::new();
        store.insert("b.x", Tensor::new(vec![vals.len()], vals.clone()).unwrap()).unwrap();
        store.insert("a.y", Tensor::new(vec![1, vals.len()], vals.clone()).unwrap()).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&store, &mut bytes).unwrap();
        prop_assert_eq!(&bytes[..6], b"BIGAT1");
        let back: ParameterStore<f64> = read_checkpoint(&bytes[..]).unwrap();
        prop_assert_eq!(back.value("a.y").unwrap(), store.value("a.y").unwrap());
        prop_assert_eq!(back.value("b.x").unwrap(), store.value("b.x").unwrap());
    }
}

#[test]
fn two_consumers_sum_their_contributions() {
    // y = x * exp(x) at x = 0.5: dy/dx = exp(x) + x exp(x)
    let g = Graph::new();
    let x = g.variable(Tensor::scalar(0.5));
    let y = x.mul(x.exp().unwrap()).unwrap();
    y.backward().unwrap();
    let want = 0.5f64.exp() * 1.5;
    assert!((x.grad().unwrap().item() - want).abs() < 1e-15);
}

#[test]
fn checkpoint_layout_is_name_sorted_little_endian() {
    let mut store = ParameterStore::new();
    store.insert("zz", Tensor::scalar(1.0)).unwrap();
    store.insert("aa", Tensor::new(vec![2], vec![2.0, -0.5]).unwrap()).unwrap();
    let mut bytes = Vec::new();
    write_checkpoint(&store, &mut bytes).unwrap();
    let mut want = b"BIGAT1".to_vec();
    want.extend(2u32.to_le_bytes());
    want.extend(b"aa");
    want.extend(1u32.to_le_bytes());
    want.extend(2u64.to_le_bytes());
    want.extend(2.0f64.to_le_bytes());
    want.extend((-0.5f64).to_le_bytes());
    want.extend(2u32.to_le_bytes());
    want.extend(b"zz");
    want.extend(0u32.to_le_bytes());
    want.extend(1.0f64.to_le_bytes());
    assert_eq!(bytes, want);
}
