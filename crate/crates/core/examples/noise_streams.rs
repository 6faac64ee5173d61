//! Per-path noise is addressed by (seed, substream, step), so any path can be
//! regenerated alone and coarse paths reuse the fine increments.

use fkdirichlet::pathsim::{CoarsenedNoise, NoiseSource, NoiseStream};

fn main() {
    let mut a = NoiseStream::new(42, 7, 2);
    let mut z = vec![0.0; 2];
    let mut first = Vec::new();
    for _ in 0..4 {
        a.next_normals(&mut z);
        first.push(z.clone());
    }
    let mut b = NoiseStream::at_step(42, 7, 2, 2);
    b.next_normals(&mut z);
    println!("step 2 from the start: {:?}", first[2]);
    println!("step 2 by direct jump: {z:?}");
    let mut c = CoarsenedNoise::new(NoiseStream::new(42, 7, 2), 2, 2);
    c.next_normals(&mut z);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    println!("coarse step 0: {z:?} = ({:.6}, {:.6})", s * (first[0][0] + first[1][0]), s * (first[0][1] + first[1][1]));
}
