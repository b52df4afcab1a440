//! Small derivative-free minimizer used by the search routines.

/// Result of a Nelder-Mead run.
pub struct NmResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Standard Nelder-Mead simplex descent (reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2) from `start` with an axis-aligned initial
/// simplex of edge `step`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    step: f64,
    max_iter: usize,
    f_tol: f64,
) -> NmResult {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let v0 = f(start);
    simplex.push((start.to_vec(), v0));
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += step;
        let v = f(&p);
        simplex.push((p, v));
    }
    let mut iters = 0;
    while iters < max_iter {
        iters += 1;
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        if (simplex[n].1 - simplex[0].1).abs() < f_tol {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(p, _)| p[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let combine = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|k| centroid[k] + t * (centroid[k] - worst.0[k]))
                .collect()
        };
        let refl = combine(1.0);
        let fr = f(&refl);
        if fr < simplex[0].1 {
            let exp = combine(2.0);
            let fe = f(&exp);
            simplex[n] = if fe < fr { (exp, fe) } else { (refl, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (refl, fr);
        } else {
            let contr = combine(-0.5);
            let fc = f(&contr);
            if fc < worst.1 {
                simplex[n] = (contr, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for k in 0..n {
                        entry.0[k] = best[k] + 0.5 * (entry.0[k] - best[k]);
                    }
                    entry.1 = f(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    NmResult {
        point: simplex[0].0.clone(),
        value: simplex[0].1,
        iterations: iters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let r = nelder_mead(
            |p| (p[0] - 1.5).powi(2) + 3.0 * (p[1] + 0.5).powi(2),
            &[0.0, 0.0],
            0.5,
            500,
            1e-14,
        );
        assert!((r.point[0] - 1.5).abs() < 1e-5);
        assert!((r.point[1] + 0.5).abs() < 1e-5);
    }

    #[test]
    fn minimizes_rosenbrock() {
        let r = nelder_mead(
            |p| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2),
            &[-1.0, 1.0],
            0.5,
            2000,
            1e-15,
        );
        assert!(r.value < 1e-8);
    }
}
