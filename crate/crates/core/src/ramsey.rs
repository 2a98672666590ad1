//! Ramsey fringes of a qubit whose readout cavity fills with SLUG photons
//! while it precesses, and the extraction of precession frequencies from them.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::backaction::{cavity_fill, cavity_fill_integral, dephasing_rate, DephasingModel, QubitCavityParams};
use crate::error::{domain, Result};

/// Fringe amplitude over (head start, free evolution).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeSurface {
    /// Time the SLUG was on before the first π/2 pulse (s).
    pub head_start: Vec<f64>,
    /// Free evolution time between the π/2 pulses (s).
    pub evolution: Vec<f64>,
    /// `amplitude[i][j]` at `head_start[i]`, `evolution[j]`.
    pub amplitude: Vec<Vec<f64>>,
}

/// Accumulated precession phase (rad) in the rotating frame.
pub fn fringe_phase(qc: &QubitCavityParams, n_steady: f64, t_hs: f64, tau: f64) -> f64 {
    2.0 * PI * (qc.ramsey_detuning * tau + qc.two_chi_over_2pi() * cavity_fill_integral(n_steady, qc.kappa, t_hs, tau))
}

/// Decay envelope at head start `t_hs` and evolution `tau`; dephasing uses
/// the photon number at the first π/2 pulse.
pub fn fringe_envelope(qc: &QubitCavityParams, n_steady: f64, t_hs: f64, tau: f64, model: DephasingModel) -> f64 {
    let gamma = dephasing_rate(cavity_fill(n_steady, qc.kappa, t_hs), qc, model);
    (-tau / qc.t2 - gamma * tau).exp()
}

pub fn fringe_amplitude(qc: &QubitCavityParams, n_steady: f64, t_hs: f64, tau: f64, model: DephasingModel) -> f64 {
    fringe_envelope(qc, n_steady, t_hs, tau, model) * fringe_phase(qc, n_steady, t_hs, tau).cos()
}

/// Instantaneous precession frequency (Hz) at the first π/2 pulse.
pub fn precession_frequency(qc: &QubitCavityParams, n_steady: f64, t_hs: f64) -> f64 {
    qc.ramsey_detuning + qc.two_chi_over_2pi() * cavity_fill(n_steady, qc.kappa, t_hs)
}

fn check_grid(field: &'static str, g: &[f64], min_len: usize) -> Result<()> {
    if g.len() < min_len {
        return Err(domain(field, format!("needs at least {min_len} points")));
    }
    if g.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(domain(field, "times must be finite and >= 0"));
    }
    if g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain(field, "must be strictly increasing"));
    }
    Ok(())
}

pub fn ramsey_surface(
    qc: &QubitCavityParams,
    n_steady: f64,
    head_start: &[f64],
    evolution: &[f64],
    model: DephasingModel,
) -> Result<FringeSurface> {
    qc.validate()?;
    if !(n_steady.is_finite() && n_steady >= 0.0) {
        return Err(domain("n_steady", "must be >= 0"));
    }
    check_grid("head_start", head_start, 1)?;
    check_grid("evolution", evolution, 2)?;
    let amplitude = head_start
        .iter()
        .map(|&t_hs| evolution.iter().map(|&tau| fringe_amplitude(qc, n_steady, t_hs, tau, model)).collect())
        .collect();
    Ok(FringeSurface {
        head_start: head_start.to_vec(),
        evolution: evolution.to_vec(),
        amplitude,
    })
}

/// Least-squares fit of `e^{-γt}(a cos 2πft + b sin 2πft) + c`, linear
/// parameters eliminated. Returns the residual sum of squares.
fn damped_cosine_rss(t: &[f64], y: &[f64], f: f64, gamma: f64) -> f64 {
    let basis = |ti: f64| {
        let e = (-gamma * ti).exp();
        let (s, c) = (2.0 * PI * f * ti).sin_cos();
        [e * c, e * s, 1.0]
    };
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (&ti, &yi) in t.iter().zip(y) {
        let b = basis(ti);
        for r in 0..3 {
            aty[r] += b[r] * yi;
            for c in 0..3 {
                ata[r][c] += b[r] * b[c];
            }
        }
    }
    let Some(p) = solve3(ata, aty) else {
        return f64::INFINITY;
    };
    // At the least-squares optimum the residual is yᵀy − pᵀAᵀy.
    let yy: f64 = y.iter().map(|v| v * v).sum();
    (yy - (p[0] * aty[0] + p[1] * aty[1] + p[2] * aty[2])).max(0.0)
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let k = a[row][col] / a[col][col];
            for c in col..3 {
                a[row][c] -= k * a[col][c];
            }
            b[row] -= k * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Minimizes `f` until the simplex shrinks below `tol` in every coordinate.
fn nelder_mead<F: Fn([f64; 2]) -> f64>(f: F, start: [f64; 2], step: [f64; 2], iters: usize, tol: f64) -> [f64; 2] {
    let mut pts = [start, [start[0] + step[0], start[1]], [start[0], start[1] + step[1]]];
    let mut vals = pts.map(&f);
    for _ in 0..iters {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        pts = idx.map(|i| pts[i]);
        vals = idx.map(|i| vals[i]);
        let size = (1..3)
            .flat_map(|i| (0..2).map(move |k| (i, k)))
            .map(|(i, k)| (pts[i][k] - pts[0][k]).abs())
            .fold(0.0, f64::max);
        if size < tol {
            break;
        }
        let c = [(pts[0][0] + pts[1][0]) / 2.0, (pts[0][1] + pts[1][1]) / 2.0];
        let along = |k: f64| [c[0] + k * (pts[2][0] - c[0]), c[1] + k * (pts[2][1] - c[1])];
        let r = along(-1.0);
        let fr = f(r);
        if fr < vals[0] {
            let e = along(-2.0);
            let fe = f(e);
            if fe < fr {
                (pts[2], vals[2]) = (e, fe);
            } else {
                (pts[2], vals[2]) = (r, fr);
            }
        } else if fr < vals[1] {
            (pts[2], vals[2]) = (r, fr);
        } else {
            let k = along(0.5);
            let fk = f(k);
            if fk < vals[2] {
                (pts[2], vals[2]) = (k, fk);
            } else {
                for i in 1..3 {
                    pts[i] = [(pts[0][0] + pts[i][0]) / 2.0, (pts[0][1] + pts[i][1]) / 2.0];
                    vals[i] = f(pts[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    pts[best]
}

/// Fringe frequency (Hz) of one row: periodogram peak, refined by a damped
/// cosine fit.
pub fn extract_fringe_frequency(evolution: &[f64], row: &[f64]) -> Result<f64> {
    check_grid("evolution", evolution, 4)?;
    if row.len() != evolution.len() {
        return Err(domain("amplitude", "row length differs from the evolution grid"));
    }
    let n = row.len();
    let span = evolution[n - 1] - evolution[0];
    let f_nyq = 0.5 * (n - 1) as f64 / span;
    let mean = row.iter().sum::<f64>() / n as f64;
    let t: Vec<f64> = evolution.iter().map(|v| v - evolution[0]).collect();

    let df = 1.0 / (8.0 * span);
    let mut best = (0.0, f64::NEG_INFINITY);
    let mut f = df;
    while f <= f_nyq {
        let (mut re, mut im) = (0.0, 0.0);
        for (&ti, &yi) in t.iter().zip(row) {
            let (s, c) = (2.0 * PI * f * ti).sin_cos();
            re += (yi - mean) * c;
            im -= (yi - mean) * s;
        }
        let p = re * re + im * im;
        if p > best.1 {
            best = (f, p);
        }
        f += df;
    }

    // Scaled coordinates keep the simplex well conditioned.
    let fs = 1.0 / span;
    let rss = |p: [f64; 2]| damped_cosine_rss(&t, row, p[0] * fs, p[1].abs() * fs);
    let fit = nelder_mead(rss, [best.0 / fs, 1.0], [0.1, 0.5], 400, 1e-9);
    Ok(fit[0] * fs)
}

pub fn extract_fringe_frequencies(surface: &FringeSurface) -> Result<Vec<f64>> {
    surface
        .amplitude
        .iter()
        .map(|row| extract_fringe_frequency(&surface.evolution, row))
        .collect()
}

/// `f(t) = f_sat − amplitude·e^{−t/time_constant}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiseFit {
    pub f_sat: f64,
    pub amplitude: f64,
    pub time_constant: f64,
    pub rms_residual: f64,
}

fn rise_linear(t: &[f64], f: &[f64], tc: f64) -> (f64, f64, f64) {
    // Basis [1, -e^{-t/tc}].
    let (mut s11, mut s12, mut s22, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&ti, &fi) in t.iter().zip(f) {
        let e = -(-ti / tc).exp();
        s11 += 1.0;
        s12 += e;
        s22 += e * e;
        y1 += fi;
        y2 += e * fi;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() < 1e-300 {
        return (f64::NAN, f64::NAN, f64::INFINITY);
    }
    let a = (s22 * y1 - s12 * y2) / det;
    let b = (s11 * y2 - s12 * y1) / det;
    let rss = t
        .iter()
        .zip(f)
        .map(|(&ti, &fi)| {
            let r = fi - (a - b * (-ti / tc).exp());
            r * r
        })
        .sum();
    (a, b, rss)
}

/// Fits a saturating exponential to frequency versus head start.
pub fn fit_rise(t: &[f64], f: &[f64]) -> Result<RiseFit> {
    check_grid("head_start", t, 3)?;
    if f.len() != t.len() || f.iter().any(|v| !v.is_finite()) {
        return Err(domain("frequencies", "must be finite and match the head-start grid"));
    }
    let span = t[t.len() - 1] - t[0];
    let (lo, hi) = ((span / 1000.0).ln(), (span * 100.0).ln());
    let cost = |x: f64| rise_linear(t, f, x.exp()).2;
    let m = 400;
    let mut best = (lo, f64::INFINITY);
    for k in 0..=m {
        let x = lo + (hi - lo) * k as f64 / m as f64;
        let c = cost(x);
        if c < best.1 {
            best = (x, c);
        }
    }
    let h = (hi - lo) / m as f64;
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if cost(x1) < cost(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let tc = (0.5 * (a + b)).exp();
    let (f_sat, amplitude, rss) = rise_linear(t, f, tc);
    Ok(RiseFit {
        f_sat,
        amplitude,
        time_constant: tc,
        rms_residual: (rss / t.len() as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn no_photons_gives_bare_detuning() {
        let qc = QubitCavityParams::default();
        let tau = grid(0.0, 2e-6, 201);
        let s = ramsey_surface(&qc, 0.0, &[0.0, 1e-6], &tau, DephasingModel::StrongDispersive).unwrap();
        for f in extract_fringe_frequencies(&s).unwrap() {
            assert!((f - qc.ramsey_detuning).abs() / qc.ramsey_detuning < 1e-6, "{f}");
        }
        assert!((s.amplitude[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn damped_cosine_frequency_recovered() {
        let t = grid(0.0, 1e-6, 150);
        let y: Vec<f64> = t.iter().map(|&x| (-x / 3e-7).exp() * (2.0 * PI * 7.3e6 * x + 0.4).cos()).collect();
        let f = extract_fringe_frequency(&t, &y).unwrap();
        assert!((f - 7.3e6).abs() < 1.0, "{f}");
    }

    #[test]
    fn rise_fit_exact_data() {
        let t = grid(0.0, 2e-6, 30);
        let f: Vec<f64> = t.iter().map(|&x| 7.2e6 - 2.2e6 * (-x / 350e-9).exp()).collect();
        let r = fit_rise(&t, &f).unwrap();
        assert!((r.time_constant - 350e-9).abs() < 1e-12, "{r:?}");
        assert!((r.f_sat - 7.2e6).abs() < 1e-3);
        assert!((r.amplitude - 2.2e6).abs() < 1e-3);
    }

    #[test]
    fn default_surface_rise_and_saturation() {
        let qc = QubitCavityParams::default();
        let n = 1.47;
        let hs = grid(0.0, 3e-6, 31);
        // Short window: the fit then reads the frequency near the first pulse.
        let tau = grid(0.0, 250e-9, 251);
        let s = ramsey_surface(&qc, n, &hs, &tau, DephasingModel::StrongDispersive).unwrap();
        let f = extract_fringe_frequencies(&s).unwrap();
        let fit = fit_rise(&hs, &f).unwrap();
        assert!((fit.time_constant - 350e-9).abs() / 350e-9 < 0.1);
        let sat = qc.ramsey_detuning + 1.5e6 * n;
        assert!((fit.f_sat - sat).abs() / sat < 0.01);
        assert_eq!(precession_frequency(&qc, n, 1.0), sat);
        assert!(f.windows(2).all(|w| w[1] >= w[0] - 1e3));
    }

    #[test]
    fn grids_are_validated() {
        let qc = QubitCavityParams::default();
        assert!(ramsey_surface(&qc, 1.0, &[0.0], &[0.0], DephasingModel::StrongDispersive).is_err());
        assert!(ramsey_surface(&qc, 1.0, &[1.0, 0.5], &[0.0, 1.0], DephasingModel::StrongDispersive).is_err());
        assert!(fit_rise(&[0.0, 1.0], &[1.0, 2.0]).is_err());
    }
}
