use super::Tensor4;
use crate::error::{Error, Result};

pub fn relu(x: &Tensor4) -> Tensor4 {
    Tensor4::from_raw(x.dims(), x.data().iter().map(|&v| v.max(0.0)).collect())
}

/// Gradient passes where the input was strictly positive; the subgradient at
/// 0 is taken as 0.
pub fn relu_backward(x: &Tensor4, grad_out: &Tensor4) -> Result<Tensor4> {
    if x.dims() != grad_out.dims() {
        return Err(Error::shape(format!(
            "relu input {:?} vs gradient {:?}",
            x.dims(),
            grad_out.dims()
        )));
    }
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Ok(Tensor4::from_raw(x.dims(), data))
}
