//! Central finite-difference check of tape gradients.

use std::fmt;

use super::params::ParamStore;
use super::tape::{Graph, Var};
use crate::error::{NestError, Result};

/// Gradients smaller than this in magnitude are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub name: String,
    pub len: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub max_analytic: f64,
    pub max_numeric: f64,
    /// A probe produced a non-finite loss; numeric gradient is unreliable.
    pub non_finite: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradCheckReport {
    pub loss: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.max_rel_error))
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.entries
            .iter()
            .all(|e| !e.non_finite && e.max_rel_error < tol)
    }

    pub fn worst(&self) -> Option<&GradCheckEntry> {
        self.entries
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "loss {:.6}", self.loss)?;
        for e in &self.entries {
            writeln!(
                f,
                "{:<40} n={:<5} rel={:.3e} abs={:.3e} |g|max={:.3e}{}",
                e.name,
                e.len,
                e.max_rel_error,
                e.max_abs_error,
                e.max_analytic,
                if e.non_finite { " NON-FINITE" } else { "" }
            )?;
        }
        Ok(())
    }
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Compares the tape gradient of `f` against `(f(p + eps) - f(p - eps)) / 2eps`
/// for every scalar of every parameter.
pub fn grad_check<F>(f: F, params: &ParamStore, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(NestError::Param(format!("grad_check eps must be > 0, got {eps}")));
    }
    let mut g = Graph::new();
    let loss = f(&mut g, params)?;
    let loss_value = g.value(loss).item();
    let analytic = g.backward(loss)?.for_store(params);

    let eval = |p: &ParamStore| -> Option<f64> {
        let mut g = Graph::new();
        match f(&mut g, p) {
            Ok(v) => Some(g.value(v).item()).filter(|x| x.is_finite()),
            Err(_) => None,
        }
    };

    let mut work = params.clone();
    let mut entries = Vec::new();
    for (name, tensor) in params.iter() {
        let grad = &analytic[name];
        let mut entry = GradCheckEntry {
            name: name.clone(),
            len: tensor.len(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            max_analytic: grad.max_abs(),
            max_numeric: 0.0,
            non_finite: false,
        };
        for i in 0..tensor.len() {
            let original = tensor.data()[i];
            let slot = |w: &mut ParamStore, v: f64| {
                w.get_mut(name).expect("cloned store").data_mut()[i] = v;
            };
            slot(&mut work, original + eps);
            let plus = eval(&work);
            slot(&mut work, original - eps);
            let minus = eval(&work);
            slot(&mut work, original);
            let (Some(plus), Some(minus)) = (plus, minus) else {
                entry.non_finite = true;
                continue;
            };
            let numeric = (plus - minus) / (2.0 * eps);
            let a = grad.data()[i];
            entry.max_numeric = entry.max_numeric.max(numeric.abs());
            entry.max_abs_error = entry.max_abs_error.max((a - numeric).abs());
            entry.max_rel_error = entry.max_rel_error.max(rel_error(a, numeric));
        }
        entries.push(entry);
    }
    Ok(GradCheckReport {
        loss: loss_value,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::tensor::Tensor;

    #[test]
    fn linear_function_is_exact() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::row(vec![1.5, -2.0, 0.25]));
        let report = grad_check(
            |g, p| {
                let w = g.param(p, "w")?;
                let c = g.constant(Tensor::row(vec![3.0, 1.0, -4.0]));
                let y = g.mul(w, c)?;
                g.sum_all(y)
            },
            &store,
            1e-4,
        )
        .unwrap();
        assert!(report.max_rel_error() < 1e-9, "{report}");
    }

    #[test]
    fn sine_matches_cosine() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::scalar(1.0));
        let report = grad_check(
            |g, p| {
                let w = g.param(p, "w")?;
                g.sin(w)
            },
            &store,
            1e-4,
        )
        .unwrap();
        assert!((report.entries[0].max_analytic - 1f64.cos()).abs() < 1e-15);
        assert!((report.entries[0].max_numeric - 0.5403).abs() < 1e-4);
        assert!(report.entries[0].max_abs_error < 1e-6);
    }

    #[test]
    fn non_finite_probe_is_flagged() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::scalar(1e-5));
        let report = grad_check(
            |g, p| {
                let w = g.param(p, "w")?;
                g.log(w)
            },
            &store,
            1e-4,
        )
        .unwrap();
        assert!(report.entries[0].non_finite);
        assert!(!report.passes(1.0));
    }

    #[test]
    fn rejects_bad_eps() {
        let store = ParamStore::new();
        assert!(grad_check(|g, _| Ok(g.constant(Tensor::scalar(0.0))), &store, 0.0).is_err());
    }
}
