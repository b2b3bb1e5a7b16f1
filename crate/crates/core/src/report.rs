//! Report files and console rendering.
//!
//! Files keep full precision (shortest round-trip formatting); the console
//! table shows two decimals.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::analysis::{AnalysisReport, OutputFormat};
use crate::inference::DensityGrid;
use crate::Interval;

pub const POSTERIOR_HEADER: &str = "family,mean,sd,cri_lower,cri_upper,prob_below_zero,dic,p_d";
pub const PREDICTIVE_HEADER: &str = "family,mean,sd,pi_lower,pi_upper,prob_below_zero";
pub const CLASSIC_HEADER: &str = "k,mu_hat,se_mu,ci_lower,ci_upper,tau2,q,q_df,q_pvalue,i2,pi_lower,pi_upper";

pub fn report_json(report: &AnalysisReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn posterior_csv(report: &AnalysisReport) -> String {
    let mut s = format!("{POSTERIOR_HEADER}\n");
    for r in &report.posterior {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.family.cli_name(),
            r.mean,
            r.sd,
            r.cri95.lower,
            r.cri95.upper,
            r.prob_below_zero,
            r.dic,
            r.p_d
        );
    }
    s
}

pub fn predictive_csv(report: &AnalysisReport) -> String {
    let mut s = format!("{PREDICTIVE_HEADER}\n");
    for r in &report.predictive {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.family.cli_name(),
            r.mean,
            r.sd,
            r.pi95.lower,
            r.pi95.upper,
            r.prob_below_zero
        );
    }
    s
}

pub fn classic_csv(report: &AnalysisReport) -> String {
    let c = &report.classic;
    let (pl, pu) = match c.hts_pi {
        Some(Interval { lower, upper }) => (lower.to_string(), upper.to_string()),
        None => (String::new(), String::new()),
    };
    format!(
        "{CLASSIC_HEADER}\n{},{},{},{},{},{},{},{},{},{},{},{}\n",
        c.k, c.mu_hat, c.se_mu, c.ci95.lower, c.ci95.upper, c.tau2, c.q, c.q_df, c.q_pvalue, c.i2, pl, pu
    )
}

pub fn density_csv(grid: &DensityGrid) -> String {
    let mut s = String::from("theta,density\n");
    for (t, d) in grid.theta.iter().zip(&grid.density) {
        let _ = writeln!(s, "{t},{d}");
    }
    s
}

/// Writes every report file under `dir`, creating it if needed.
pub fn write_outputs(report: &AnalysisReport, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report_json(report))?;
    fs::write(dir.join("posterior.csv"), posterior_csv(report))?;
    fs::write(dir.join("predictive.csv"), predictive_csv(report))?;
    fs::write(dir.join("classic.csv"), classic_csv(report))?;
    for d in &report.densities {
        let name = d.family.cli_name();
        fs::write(dir.join(format!("density_{name}_mu.csv")), density_csv(&d.mu))?;
        fs::write(dir.join(format!("density_{name}_pred.csv")), density_csv(&d.predictive))?;
    }
    Ok(())
}

fn interval2(i: &Interval) -> String {
    format!("({:.2}, {:.2})", i.lower, i.upper)
}

fn pvalue(p: f64) -> String {
    if p < 0.01 {
        "<0.01".into()
    } else {
        format!("{p:.2}")
    }
}

/// Plain-text tables of the classic, posterior and predictive results.
pub fn render_table(report: &AnalysisReport) -> String {
    let c = &report.classic;
    let mut s = String::new();
    let _ = writeln!(s, "Classic random-effects analysis (K = {})", c.k);
    let _ = writeln!(s, "  mu      {:.2}  95% CI {}", c.mu_hat, interval2(&c.ci95));
    let _ = writeln!(s, "  tau2    {:.2}", c.tau2);
    let _ = writeln!(s, "  I2      {:.2}%", c.i2);
    let _ = writeln!(s, "  Q       {:.2} on {} df, p {}", c.q, c.q_df, pvalue(c.q_pvalue));
    match &c.hts_pi {
        Some(pi) => {
            let _ = writeln!(s, "  95% PI  {}", interval2(pi));
        }
        None => {
            let _ = writeln!(s, "  95% PI  not available for K < 3");
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Posterior of mu");
    let _ = writeln!(
        s,
        "  {:<12} {:>8} {:>8} {:>20} {:>8} {:>9}",
        "Model", "Mean", "SD", "95% CrI", "Pr(<0)", "DIC"
    );
    for r in &report.posterior {
        let _ = writeln!(
            s,
            "  {:<12} {:>8.2} {:>8.2} {:>20} {:>8.2} {:>9.2}",
            r.label,
            r.mean,
            r.sd,
            interval2(&r.cri95),
            r.prob_below_zero,
            r.dic
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Predictive distribution of theta_new");
    let _ = writeln!(
        s,
        "  {:<12} {:>8} {:>8} {:>20} {:>8}",
        "Model", "Mean", "SD", "95% PI", "Pr(<0)"
    );
    for r in &report.predictive {
        let _ = writeln!(
            s,
            "  {:<12} {:>8.2} {:>8.2} {:>20} {:>8.2}",
            r.label,
            r.mean,
            r.sd,
            interval2(&r.pi95),
            r.prob_below_zero
        );
    }
    let warnings: Vec<String> = report
        .diagnostics
        .iter()
        .flat_map(|d| d.diagnostics.warnings.iter().map(move |w| format!("{}: {w}", d.family.label())))
        .collect();
    if !warnings.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "Convergence warnings");
        for w in warnings {
            let _ = writeln!(s, "  {w}");
        }
    }
    s
}

/// The report in the requested console format.
pub fn render(report: &AnalysisReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Table => render_table(report),
        OutputFormat::Csv => format!("{}\n{}", posterior_csv(report), predictive_csv(report)),
        OutputFormat::Json => report_json(report),
    }
}
