use super::params::ParamStore;
use super::tape::{Session, Tape, Var};

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_component: usize,
    pub tol: f64,
    pub components_checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tol
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: max rel err {:.3e} (tol {:.1e}, worst {}[{}], {} components)",
            if self.passed() { "pass" } else { "FAIL" },
            self.max_rel_err,
            self.tol,
            self.worst_param,
            self.worst_component,
            self.components_checked
        )
    }
}

/// Compare the tape gradient of a scalar loss against central finite
/// differences `(f(p+h) - f(p-h)) / 2h`, component by component over every
/// parameter the build closure binds.
///
/// The build closure must be a pure function of the store contents; it is
/// re-evaluated with perturbed parameters to obtain the numeric gradient.
/// Relative error uses `max(|analytic|, |numeric|, 1e-6)` as denominator so
/// that near-zero gradients compare absolutely.
pub fn grad_check<F>(store: &mut ParamStore, mut build: F, h: f64, tol: f64) -> GradCheckReport
where
    F: FnMut(&ParamStore, &Session) -> Var,
{
    // Analytic pass.
    let tape = Tape::new();
    let session = Session::new(&tape, store);
    let root = build(store, &session);
    let grads = tape.backward(root);
    let analytic: Vec<(super::ParamId, Vec<f64>)> = session
        .bound()
        .into_iter()
        .filter(|(id, _)| store.get(*id).requires_grad)
        .map(|(id, var)| {
            let g = grads
                .get(var)
                .map(|g| g.to_vec())
                .unwrap_or_else(|| vec![0.0; store.get(id).len()]);
            (id, g)
        })
        .collect();

    let eval = |store: &ParamStore, build: &mut F| -> f64 {
        let tape = Tape::new();
        let session = Session::new(&tape, store);
        let root = build(store, &session);
        tape.scalar(root)
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_component: 0,
        tol,
        components_checked: 0,
    };

    for (id, g) in &analytic {
        for k in 0..g.len() {
            let orig = store.get(*id).data()[k];
            store.get_mut(*id).data_mut()[k] = orig + h;
            let fp = eval(store, &mut build);
            store.get_mut(*id).data_mut()[k] = orig - h;
            let fm = eval(store, &mut build);
            store.get_mut(*id).data_mut()[k] = orig;
            let numeric = (fp - fm) / (2.0 * h);
            let denom = g[k].abs().max(numeric.abs()).max(1e-6);
            let rel = (g[k] - numeric).abs() / denom;
            report.components_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = store.name(*id).to_string();
                report.worst_component = k;
            }
        }
    }
    report
}
