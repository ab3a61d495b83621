//! The segmentation losses on a toy batch: cross-entropy, the Lovasz-softmax
//! surrogate and the masked feature regression used for camera completion.

use fuseg3d::supervision::{cross_entropy_value, lovasz_softmax_value, pixel2point_value};
use fuseg3d::tensor::{softmax_axis, Tensor};

fn main() -> fuseg3d::Result<()> {
    // Class 0 is ignored; four points of classes 1 and 2.
    let labels = [1, 2, 2, 0, 1];
    let confident = Tensor::from_rows(&[
        vec![0.0, 4.0, 0.0],
        vec![0.0, 0.0, 4.0],
        vec![0.0, 0.5, 3.0],
        vec![9.0, 0.0, 0.0],
        vec![0.0, 3.0, 1.0],
    ])?;
    let uniform = Tensor::zeros([5, 3]);
    for (name, logits) in [("confident", &confident), ("uniform", &uniform)] {
        let (ce, _) = cross_entropy_value(logits, &labels, 0)?;
        let (lovasz, _) = lovasz_softmax_value(&softmax_axis(logits, 1)?, &labels, 0)?;
        println!("{name:<9} cross-entropy {ce:.4}  lovasz {lovasz:.4}");
    }
    println!("uniform cross-entropy equals ln 3 = {:.4}", 3f64.ln());

    let pred = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5], vec![7.0, -7.0]])?;
    let target = Tensor::from_rows(&[vec![1.0, 1.0], vec![0.5, 0.0], vec![0.0, 0.0]])?;
    // The third point has no camera hit, so its row does not count.
    let (l, _) = pixel2point_value(&pred, &target, &[true, true, false])?;
    println!("completion regression over camera-visible points: {l:.4}");
    Ok(())
}
