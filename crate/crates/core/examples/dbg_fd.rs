use mcrecon_core::tensor_nn::*;
use mcrecon_core::testkit;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn rand_tensor(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let mut t = Tensor::zeros(dims);
    for v in t.data_mut() { let n: f64 = StandardNormal.sample(rng); *v = n as Real; }
    t
}

fn main() {
    // reproduce trial 11 of vjp_input_matches_directional_fd
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let spec = NetworkSpec::residual_unet(2, &[4, 8]);
    let mut params = ParamStore::init(&spec, 0);
    let mut x = Tensor::zeros(&[1,2,16,16]);
    let mut cot = Tensor::zeros(&[1,2,16,16]);
    for trial in 0..=11u64 {
        params = ParamStore::init(&spec, trial);
        for e in params.entries_mut() {
            for v in e.tensor.data_mut() { let n: f64 = StandardNormal.sample(&mut rng); *v = (n*0.25) as Real; }
        }
        x = rand_tensor(&[1, 2, 16, 16], &mut rng);
        cot = rand_tensor(&[1, 2, 16, 16], &mut rng);
    }
    let (gx, _) = vjp(&spec, &params, &x, &cot).unwrap();
    let probe = testkit::directional_fd(&spec, &params, &x, &cot, &gx).unwrap();
    let analytic: f64 = gx.data().iter().zip(&probe.realized_dir).map(|(g,d)| *g as f64 * d).sum();
    println!("analytic {analytic} fd {}", probe.fd);

    // jvp along realized dir
    let mut realized = Tensor::zeros(x.dims());
    for (r, v) in realized.data_mut().iter_mut().zip(&probe.realized_dir) { *r = *v as Real; }
    let tape = forward_with_tape(&spec, &params, &x).unwrap();
    let tans = jvp(&spec, &params, &tape, &realized).unwrap();
    let jv = tans.last().unwrap().dot(&cot);
    println!("jvp(realized).cot {jv}");

    // interior masks along the segment vs center
    let eps = 1e-3 * x.norm().max(1.0) / gx.norm();
    for frac in [-1.0f64, -0.5, 0.25, 0.5, 0.75, 1.0] {
        let mut xs = x.clone();
        for (v, d) in xs.data_mut().iter_mut().zip(gx.data()) { *v += (frac*eps) as Real * *d; }
        let flips = testkit::relu_flips(&spec, &params, &x, &xs);
        println!("frac {frac}: flips vs center {flips}");
    }
}
