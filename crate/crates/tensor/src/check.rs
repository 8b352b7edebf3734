use crate::params::ParamSet;
use crate::tape::{Tape, TensorRef};
use crate::{Result, TensorError};

/// Compare reverse-mode gradients against central finite differences.
///
/// `build` must deterministically construct the forward graph from the
/// current parameter values and return the tape together with the scalar
/// loss (regularizers disabled, or driven by a stream reseeded identically
/// on every call). Returns the maximum relative error over all parameter
/// entries, with the denominator floored at 1 so near-zero gradients are
/// compared absolutely.
pub fn finite_difference_check<F>(build: F, params: &mut ParamSet, h: f64) -> Result<f64>
where
    F: Fn(&ParamSet) -> Result<(Tape, TensorRef)>,
{
    if h <= 0.0 {
        return Err(TensorError::InvalidArgument(format!(
            "finite-difference step must be positive, got {}",
            h
        )));
    }
    let (tape, loss) = build(params)?;
    let loss_value = tape.value(loss);
    if !loss_value.is_scalar() {
        return Err(TensorError::NonScalarLoss(loss_value.shape().to_vec()));
    }
    let analytic = tape.backward(loss)?.dense(params);

    let eval = |params: &ParamSet| -> Result<f64> {
        let (tape, loss) = build(params)?;
        Ok(tape.value(loss).data()[0])
    };

    let mut max_rel = 0.0f64;
    for id in params.ids().collect::<Vec<_>>() {
        for idx in 0..params.get(id).len() {
            let orig = params.get(id).data()[idx];
            params.get_mut(id).data_mut()[idx] = orig + h;
            let plus = eval(params)?;
            params.get_mut(id).data_mut()[idx] = orig - h;
            let minus = eval(params)?;
            params.get_mut(id).data_mut()[idx] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[id.index()].data()[idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    // f(p) = sum(p^2): analytic gradient 2p.
    fn quadratic(params: &ParamSet) -> Result<(Tape, TensorRef)> {
        let mut tape = Tape::new();
        let id = params.ids().next().unwrap();
        let p = tape.param(id, params.get(id));
        let sq = tape.mul(p, p)?;
        let loss = tape.mean(sq)?;
        let loss = tape.scale(loss, params.get(id).len() as f64)?;
        Ok((tape, loss))
    }

    #[test]
    fn quadratic_matches_analytic() {
        let mut params = ParamSet::new();
        params.add("p", Tensor::from_vec(vec![1.0, 2.0]));
        let err = finite_difference_check(quadratic, &mut params, 1e-5).unwrap();
        assert!(err < 1e-9, "relative error {}", err);
    }

    #[test]
    fn rejects_nonpositive_step() {
        let mut params = ParamSet::new();
        params.add("p", Tensor::from_vec(vec![1.0]));
        assert!(finite_difference_check(quadratic, &mut params, 0.0).is_err());
        assert!(finite_difference_check(quadratic, &mut params, -1e-5).is_err());
    }
}
