use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sctl::neural::Mlp;
use std::time::Instant;

fn main() {
    let mut rng = ChaCha12Rng::seed_from_u64(0);
    let net = Mlp::new(&[17, 256, 256, 256, 16], &mut rng);
    let x = DMatrix::from_fn(17, 256, |_, _| 0.1);
    let up = DMatrix::from_fn(16, 256, |_, _| 0.01);

    let t = Instant::now();
    for _ in 0..100 { let _ = net.forward_batch(&x).unwrap(); }
    println!("forward_batch: {:.2} ms/call", t.elapsed().as_secs_f64() * 10.0);

    let t = Instant::now();
    for _ in 0..100 { let _ = net.forward_cached(&x).unwrap(); }
    println!("forward_cached: {:.2} ms/call", t.elapsed().as_secs_f64() * 10.0);

    let cache = net.forward_cached(&x).unwrap();
    let t = Instant::now();
    for _ in 0..100 { let _ = net.backward(&cache, &up); }
    println!("backward: {:.2} ms/call", t.elapsed().as_secs_f64() * 10.0);

    let t = Instant::now();
    for _ in 0..100 { let _ = net.backward_input_only(&cache, &up); }
    println!("backward_input_only: {:.2} ms/call", t.elapsed().as_secs_f64() * 10.0);

    // raw gemm reference: 256^3
    let a = DMatrix::<f64>::from_element(256, 256, 0.5);
    let b = DMatrix::<f64>::from_element(256, 256, 0.5);
    let mut c = DMatrix::<f64>::zeros(256, 256);
    let t = Instant::now();
    for _ in 0..1000 { c.gemm(1.0, &a, &b, 0.0); }
    let per = t.elapsed().as_secs_f64() / 1000.0;
    println!("raw gemm 256: {:.3} ms/call = {:.1} GFLOPS", per * 1e3, 2.0 * 256f64.powi(3) / per / 1e9);
}
