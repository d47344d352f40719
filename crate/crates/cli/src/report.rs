//! Text and CSV renderings of results.

use std::fmt::Write as _;

use accim::analysis::{DensityBounds, LipschitzRow, ShrinkStudyRow, Solution, BATTERY_LEN};
use accim::checker::{ConstantsReport, HypothesisReport, Transitivity};
use accim::montecarlo::{Histogram, RatioFit, SurvivalRecord};
use accim::operator::TowerDensity;
use accim::tower::Tower;
use accim::{Error, Result};

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn constants_text(c: &ConstantsReport, h: &HypothesisReport, t: &Transitivity) -> String {
    let mut s = String::new();
    let rows: [(&str, f64); 22] = [
        ("mu", c.mu),
        ("alpha", c.alpha),
        ("delta", c.delta),
        ("N", c.n_bases as f64),
        ("gamma (mu/2)", c.gamma_generic),
        ("gamma (measured)", c.gamma),
        ("beta", c.beta),
        ("C~", c.c_tilde),
        ("C", c.c),
        ("xi", c.xi),
        ("a", c.a),
        ("b", c.b),
        ("M", c.m),
        ("theta", c.theta),
        ("A", c.a_level),
        ("q", c.q),
        ("D", c.d_h3),
        ("mH", c.mh),
        ("1 - qM", c.lambda_lower),
        ("e^-xi", c.lambda_floor),
        ("q bound", c.q_bound),
        ("C0", c.c0),
    ];
    writeln!(s, "constants").unwrap();
    for (k, v) in rows {
        writeln!(s, "  {k:<18} {v}").unwrap();
    }
    if !c.valid {
        writeln!(s, "  a >= 1: M and the bounds built on it are void").unwrap();
    }
    writeln!(s, "hypotheses").unwrap();
    writeln!(s, "  {:<5} {:<6} {:>24} {:>24} {:>24}", "name", "status", "value", "threshold", "margin").unwrap();
    for ch in &h.checks {
        writeln!(
            s,
            "  {:<5} {:<6} {:>24} {:>24} {:>24}",
            ch.name,
            ch.status.to_string(),
            ch.value,
            ch.threshold,
            ch.margin
        )
        .unwrap();
    }
    writeln!(s, "levels (H1: m(Delta_l) + m(H~_l) <= A theta^l)").unwrap();
    for l in &h.h1_levels {
        writeln!(s, "  {:>4} {:>24} {:>24}", l.level, l.mass, l.bound).unwrap();
    }
    match t {
        Transitivity::Satisfied(n) => writeln!(s, "transitivity: satisfied, n_j = {n:?}").unwrap(),
        Transitivity::Undetermined => writeln!(s, "transitivity: undetermined").unwrap(),
    }
    s
}

pub fn solve_text(sol: &Solution, bounds: &DensityBounds, ulam: Option<(usize, f64)>) -> String {
    let r = &sol.result;
    let mut s = String::new();
    writeln!(s, "lambda          {}", r.lambda).unwrap();
    writeln!(s, "escape rate     {}", r.escape_rate).unwrap();
    writeln!(s, "int P_T psi     {}", r.interval_lambda).unwrap();
    writeln!(s, "1 - qM          {}", sol.constants.lambda_lower).unwrap();
    writeln!(s, "iterations      {} (converged: {}, step {})", r.iterations, r.converged, r.fixed_point_residual).unwrap();
    writeln!(s, "residual        {}", r.residual).unwrap();
    writeln!(s, "int psi         {}", r.integral).unwrap();
    writeln!(s, "sup psi         {} (bound {}, {})", r.sup_psi, bounds.sup.bound, verdict(bounds.sup.holds)).unwrap();
    match &bounds.inf {
        Some(b) => writeln!(s, "inf psi         {} (bound {}, {}; {})", r.inf_psi, b.bound, verdict(b.holds), bounds.inf_note).unwrap(),
        None => writeln!(s, "inf psi         {} ({})", r.inf_psi, bounds.inf_note).unwrap(),
    }
    if let Some(v) = &bounds.variation {
        writeln!(s, "variation       {} (bound {}, {})", v.value, v.bound, verdict(v.holds)).unwrap();
    }
    writeln!(s, "tail mass       {}", sol.tower.tail_mass()).unwrap();
    writeln!(s, "hypotheses      {}", if r.hypotheses_pass { "PASS" } else { "FAIL" }).unwrap();
    if let Some((bins, lambda)) = ulam {
        writeln!(s, "ulam lambda     {lambda} ({bins} bins)").unwrap();
    }
    s
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "holds"
    } else {
        "VIOLATED"
    }
}

/// `bin_left, bin_right, psi`.
pub fn density_csv(psi: &[f64]) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(["bin_left", "bin_right", "psi"]).map_err(csv_err)?;
    let n = psi.len() as f64;
    for (i, v) in psi.iter().enumerate() {
        w.write_record([(i as f64 / n).to_string(), ((i + 1) as f64 / n).to_string(), v.to_string()])
            .map_err(csv_err)?;
    }
    finish(w)
}

/// `base, level, node, x, phi` at every sample.
pub fn tower_density_csv(tower: &Tower, phi: &TowerDensity, ys: impl Fn(usize, usize) -> f64) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(["base", "level", "node", "x", "phi"]).map_err(csv_err)?;
    for (n, node) in tower.nodes().iter().enumerate() {
        for (k, v) in phi.node(n).iter().enumerate() {
            w.write_record([
                node.root.to_string(),
                node.level.to_string(),
                n.to_string(),
                ys(n, k).to_string(),
                v.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

pub fn lipschitz_csv(rows: &[LipschitzRow]) -> Result<String> {
    let mut w = csv_writer();
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    finish(w)
}

pub fn shrink_csv(rows: &[ShrinkStudyRow]) -> Result<String> {
    let mut w = csv_writer();
    let mut header: Vec<String> = ["s", "mh", "lambda", "one_minus_lambda_over_mh", "l1_dist", "weak_max", "mixing"]
        .map(String::from)
        .to_vec();
    header.extend((0..BATTERY_LEN).map(|i| format!("weak_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.s.to_string(),
            r.mh.to_string(),
            r.lambda.to_string(),
            opt(r.one_minus_lambda_over_mh),
            r.l1_dist.to_string(),
            r.weak_max.to_string(),
            r.mixing.to_string(),
        ];
        rec.extend(r.weak_dists.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish(w)
}

pub fn survival_csv(rows: &[SurvivalRecord]) -> Result<String> {
    let mut w = csv_writer();
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    finish(w)
}

pub fn histogram_csv(h: &Histogram) -> Result<String> {
    let mut w = csv_writer();
    for b in &h.bins {
        w.serialize(b).map_err(csv_err)?;
    }
    finish(w)
}

pub fn mc_text(rows: &[SurvivalRecord], fit: Option<&RatioFit>, tower_lambda: Option<f64>) -> String {
    let mut s = String::new();
    let last = rows.last().expect("at least the n = 0 row");
    writeln!(s, "steps recorded  {}", last.n).unwrap();
    writeln!(s, "final p_n       {} ({} survivors)", last.p_n, last.survivors).unwrap();
    match fit {
        Some(f) => {
            writeln!(s, "ratio fit       {} +- {} over n in [{}, {})", f.lambda, f.stderr, f.from, f.to).unwrap();
            writeln!(s, "escape rate     {}", -f.lambda.ln()).unwrap();
            if let Some(l) = tower_lambda {
                let z = (f.lambda - l) / f.stderr;
                writeln!(s, "tower lambda    {l} ({z:+.3} sigma)").unwrap();
            }
        }
        None => writeln!(s, "ratio fit       unavailable (too few survivors or steps)").unwrap(),
    }
    s
}
