//! Builds a small expression on the tape, runs backward and compares the
//! analytic gradient with central differences.

use fuseg3d::tensor::{tape_gradient_error, Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fuseg3d::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Tensor::randn([4, 6], 1.0, &mut rng);
    let w = Tensor::randn([6, 3], 0.5, &mut rng);

    // sum(softmax(x W)^2)
    let f = |tape: &mut Tape, v: &[fuseg3d::tensor::Var]| {
        let h = tape.matmul(v[0], v[1])?;
        let p = tape.softmax(h, 1)?;
        let sq = tape.mul(p, p)?;
        tape.sum(sq)
    };

    let mut tape = Tape::new();
    let vars = [tape.param(x.clone())?, tape.param(w.clone())?];
    let loss = f(&mut tape, &vars)?;
    println!("loss {:.6}", tape.value(loss).item().unwrap());
    let grads = tape.backward(loss)?;
    println!("d loss / d W row 0: {:?}", &grads.get(vars[1]).unwrap().row(0));

    let err = tape_gradient_error(&[x, w], f)?;
    println!("max relative error vs finite differences: {err:.2e}");
    Ok(())
}
