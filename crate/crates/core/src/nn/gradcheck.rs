use super::{Graph, NodeId, ParamStore};
use crate::Result;

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares backward-pass gradients of every trainable parameter entry with
/// central differences of step `eps`. Returns the largest relative error.
/// Parameter values are left as they were.
pub fn gradient_check<F>(store: &mut ParamStore<f64>, eps: f64, loss_fn: F) -> Result<f64>
where
    F: Fn(&mut Graph<'_, f64>) -> Result<NodeId>,
{
    let eval = |store: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::new(store);
        let loss = loss_fn(&mut g)?;
        Ok(g.scalar(loss))
    };
    let analytic = {
        let mut g = Graph::new(store);
        let loss = loss_fn(&mut g)?;
        g.backward(loss)?
    };
    let mut worst: f64 = 0.0;
    let ids: alloc::vec::Vec<_> = store.ids().collect();
    for id in ids {
        if !store.get(id).trainable {
            continue;
        }
        let n = store.value(id).len();
        for k in 0..n {
            let a = analytic.param(id).map_or(0.0, |t| t.data()[k]);
            let orig = store.value(id).data()[k];
            store.get_mut(id).value.data_mut()[k] = orig + eps;
            let plus = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = orig - eps;
            let minus = eval(store)?;
            store.get_mut(id).value.data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(a, numeric));
        }
    }
    Ok(worst)
}
