//! Text reports for `check` and `spectrum`.

use std::fmt::Write;

use mwconsensus::builtin;
use mwconsensus::graph::{self, Balance, InputCoupling, MatrixWeightedGraph};
use mwconsensus::linalg;
use mwconsensus::scenario::ModeSection;
use mwconsensus::trigger;
use mwconsensus::ScenarioFile;

pub struct Report {
    pub text: String,
    pub ok: bool,
}

fn group_list(nodes: &[usize]) -> String {
    let v: Vec<String> = nodes.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", v.join(", "))
}

fn coupling(file: &ScenarioFile, g: &MatrixWeightedGraph) -> mwconsensus::Result<Option<InputCoupling>> {
    match file.mode {
        ModeSection::Leaderless => Ok(None),
        ModeSection::LeaderFollower { .. } => file.build_coupling(g).map(Some),
    }
}

pub fn check(file: &ScenarioFile, published: bool) -> mwconsensus::Result<Report> {
    let g = file.build_graph()?;
    let b = coupling(file, &g)?;
    let mut out = String::new();
    let mut ok = true;
    let w = &mut out;

    writeln!(w, "graph: n = {}, d = {}, weight tolerance = {:e}", g.n(), g.d(), g.tol()).unwrap();
    writeln!(w, "edges:").unwrap();
    for e in g.edges() {
        writeln!(
            w,
            "  {:>3} - {:<3} {:<11} mu_max = {:.6}",
            e.i + 1,
            e.j + 1,
            e.class.short_name(),
            e.mu
        )
        .unwrap();
    }
    if let Some(b) = &b {
        writeln!(w, "inputs:").unwrap();
        for e in b.entries() {
            writeln!(
                w,
                "  agent {:>3} <- input {:<3} {:<11} mu_max = {:.6}",
                e.agent + 1,
                e.input + 1,
                e.class.short_name(),
                e.mu
            )
            .unwrap();
        }
    }
    for warning in g.warnings() {
        writeln!(w, "warning: {warning}").unwrap();
    }

    match graph::detect_structural_balance(&g) {
        Balance::Balanced(bp) => writeln!(
            w,
            "structural balance: balanced, bipartition {} / {}",
            group_list(&bp.group1),
            group_list(&bp.group2)
        )
        .unwrap(),
        Balance::Imbalanced { conflict } => writeln!(
            w,
            "structural balance: imbalanced (sign conflict at edge {} - {})",
            conflict.0 + 1,
            conflict.1 + 1
        )
        .unwrap(),
    }

    let a1 = graph::verify_assumption1(&g);
    ok &= a1.holds;
    writeln!(
        w,
        "assumption 1: {} (nullity {}, need {}; subspace sine {:.3e})",
        if a1.holds { "holds" } else { "fails" },
        a1.nullity,
        g.d(),
        a1.subspace_sine
    )
    .unwrap();

    if let Some(b) = &b {
        let a2 = graph::verify_assumption2(&g, b);
        ok &= a2.holds;
        writeln!(
            w,
            "assumption 2: {} (extended graph balanced: {}, input mass positive definite: {})",
            if a2.holds { "holds" } else { "fails" },
            a2.extended_balanced,
            a2.input_mass_pd
        )
        .unwrap();
        if a2.holds {
            match graph::leader_follower_gauge(&g, b) {
                Ok(gauge) => {
                    let signs: Vec<&str> = gauge.signs.iter().map(|&s| if s > 0 { "+" } else { "-" }).collect();
                    writeln!(w, "tracking gauge: ({})", signs.join(", ")).unwrap();
                }
                Err(e) => {
                    ok = false;
                    writeln!(w, "tracking gauge: {e}").unwrap();
                }
            }
        }
    }

    writeln!(w, "agent  degree  mu_bar{}", if b.is_some() { "       gamma" } else { "" }).unwrap();
    for i in 0..g.n() {
        let mu = trigger::mu_bar(&g, i)
            .map(|m| format!("{m:.4}"))
            .unwrap_or_else(|_| "-".into());
        let gamma = b
            .as_ref()
            .map(|b| format!("  {:>10.4}", trigger::gamma(&g, b, i)))
            .unwrap_or_default();
        writeln!(w, "{:>5}  {:>6}  {:>7}{gamma}", i + 1, g.degree(i), mu).unwrap();
    }
    if published {
        let listed: Vec<String> = builtin::PUBLISHED_MU_BAR.iter().map(|v| v.to_string()).collect();
        writeln!(w, "published mu_bar: {}", listed.join(", ")).unwrap();
        if b.is_some() {
            writeln!(
                w,
                "note: the published leader-follower listing repeats these values; gamma above is the formula value"
            )
            .unwrap();
        }
    }

    match file.resolve_params() {
        Ok(params) => {
            if let Err(v) = trigger::validate_params(&params, g.n()) {
                ok = false;
                for x in v {
                    writeln!(w, "parameter violation: {x}").unwrap();
                }
            }
        }
        Err(e) => {
            ok = false;
            writeln!(w, "parameter error: {e}").unwrap();
        }
    }
    writeln!(w, "verdict: {}", if ok { "ok" } else { "FAILED" }).unwrap();
    Ok(Report { text: out, ok })
}

fn spectrum_block(w: &mut String, name: &str, m: &linalg::SymMatrix, tol: f64) {
    let eig = linalg::sym_eigen(m);
    let band = linalg::zero_band(&eig.eigenvalues, tol);
    let nullity = eig.eigenvalues.iter().filter(|v| v.abs() <= band).count();
    let smallest_positive = eig.eigenvalues.iter().copied().find(|&v| v > band);
    writeln!(w, "{name} eigenvalues (ascending):").unwrap();
    for (k, v) in eig.eigenvalues.iter().enumerate() {
        writeln!(w, "  {:>4}  {v:.12e}", k + 1).unwrap();
    }
    writeln!(w, "{name} nullity: {nullity} (zero band {band:.3e})").unwrap();
    match smallest_positive {
        Some(v) => writeln!(w, "{name} smallest positive eigenvalue: {v:.12e}").unwrap(),
        None => writeln!(w, "{name} smallest positive eigenvalue: none").unwrap(),
    }
    writeln!(w, "{name} min eigenvalue: {:.12e}", eig.min()).unwrap();
}

pub fn spectrum(file: &ScenarioFile) -> mwconsensus::Result<String> {
    let g = file.build_graph()?;
    let mut out = String::new();
    let l = graph::build_laplacian(&g);
    spectrum_block(&mut out, "L", &l, g.tol());
    if let Some(b) = coupling(file, &g)? {
        let lb = graph::build_grounded_laplacian(&g, &b);
        spectrum_block(&mut out, "L_B", &lb, g.tol());
    }
    Ok(out)
}
