//! Experiment subcommands.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use divfree::diagnostics::{cfl_sweep, convergence_study, CflForm, StudyConfig};
use divfree::integrators::{run, Discretization, IntegratorKind, RunReport, SchemeConfig};
use divfree::manufactured::taylor_green;
use divfree::mesh::Mesh;

use crate::config::{ExperimentConfig, FormatArg};
use crate::format::{fix3, full, sci3, tau_label, Table};

/// Outcome of a command: the process exit code.
pub const EXIT_OK: i32 = 0;
pub const EXIT_BLOW_UP: i32 = 2;

fn study(cfg: &ExperimentConfig, n_list: Vec<usize>) -> StudyConfig<f64> {
    StudyConfig {
        final_time: cfg.final_time,
        nu: cfg.nu,
        sigma: Some(cfg.sigma),
        perturb: cfg.perturb,
        seed: cfg.seed,
        forcing_mode: cfg.forcing_mode(),
        integrator: cfg.integrator_kind(),
        ..StudyConfig::new(cfg.k, n_list, cfg.cfl_form(), cfg.co)
    }
}

fn scheme(cfg: &ExperimentConfig, tau: f64, integrator: IntegratorKind) -> Result<SchemeConfig<f64>> {
    let s = SchemeConfig::new(cfg.k, tau, cfg.final_time)?
        .with_nu(cfg.nu)
        .with_sigma(cfg.sigma)
        .with_forcing_mode(cfg.forcing_mode())
        .with_integrator(integrator)
        .with_zero_forcing(cfg.f_zero);
    s.validate()?;
    Ok(s)
}

fn discretization(cfg: &ExperimentConfig, n: usize) -> Result<Discretization<f64>> {
    let mesh = Arc::new(Mesh::build_structured(n, cfg.perturb, cfg.seed)?);
    Ok(Discretization::new(mesh, cfg.k)?)
}

/// Writes the tables of one command and echoes the Markdown to stdout.
/// CSV tables carry a file-name suffix; Markdown tables go into one document.
fn emit(cfg: &ExperimentConfig, command: &str, csv_tables: &[(&str, &Table)], md_tables: &[&Table]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("cannot create {}", cfg.out_dir.display()))?;
    let echo = cfg.echo(command);
    let mut written = Vec::new();
    let config_path = cfg.out_dir.join(format!("{command}_config.txt"));
    std::fs::write(&config_path, &echo).with_context(|| format!("cannot write {}", config_path.display()))?;
    written.push(config_path);
    if matches!(cfg.format, FormatArg::Csv | FormatArg::Both) {
        for (suffix, t) in csv_tables {
            let path = cfg.out_dir.join(format!("{command}{suffix}.csv"));
            t.write_csv(&path)?;
            written.push(path);
        }
    }
    let mut md = format!("## {command}\n\n```\n{echo}```\n\n");
    for t in md_tables {
        md += &t.markdown();
        md += "\n";
    }
    if matches!(cfg.format, FormatArg::Md | FormatArg::Both) {
        let path = cfg.out_dir.join(format!("{command}.md"));
        std::fs::write(&path, &md).with_context(|| format!("cannot write {}", path.display()))?;
        written.push(path);
    }
    print!("{md}");
    Ok(written)
}

fn status(r: &RunReport<f64>) -> String {
    match r.blow_up {
        Some(step) => format!("blow-up@{step}"),
        None => "completed".into(),
    }
}

pub fn single_run(cfg: &ExperimentConfig) -> Result<i32> {
    let h = 1.0 / cfg.n as f64;
    let tau = match cfg.tau {
        Some(t) => t,
        None => match cfg.cfl_form().tau(cfg.co, h) {
            Some(t) => t,
            None => bail!("single-run needs --tau or a fixed --cfl schedule"),
        },
    };
    let disc = discretization(cfg, cfg.n)?;
    let problem = taylor_green(cfg.nu)?;
    let report = run(&disc, &problem, scheme(cfg, tau, cfg.integrator_kind())?)?;

    let mut steps_cols = vec![("step", "step"), ("t", "t"), ("l2_norm", "‖u_h‖"), ("div_norm", "‖∇_h·u_h‖")];
    if cfg.f_zero {
        steps_cols.extend([("energy_residual", "energy residual"), ("jump_u", "|u|²_up"), ("jump_w", "|w|²_up")]);
    }
    let mut steps = Table::new("Per-step diagnostics", &steps_cols);
    for r in &report.records {
        let mut c = vec![r.step.to_string(), full(Some(r.t)), full(Some(r.l2_norm)), full(Some(r.div_norm))];
        let mut m = vec![r.step.to_string(), fix3(Some(r.t)), sci3(Some(r.l2_norm)), sci3(Some(r.div_norm))];
        if cfg.f_zero {
            for v in [r.energy_residual, r.jump_u, r.jump_w] {
                c.push(full(v));
                m.push(sci3(v));
            }
        }
        steps.push(c, m);
    }

    let mut summary = Table::new(
        "Summary",
        &[
            ("tau", "τ"),
            ("n_steps", "steps"),
            ("status", "status"),
            ("l2_norm", "‖u_h‖_{L²}"),
            ("l2_error", "‖u−u_h‖_{L²}"),
            ("h1_error", "‖∇_h(u−u_h)‖_{L²}"),
            ("div_norm", "‖∇_h·u_h‖_{L²}"),
            ("max_div", "max ‖∇_h·u_h‖"),
            ("wall_time_s", "time [s]"),
        ],
    );
    let e = report.final_errors;
    let vals = [report.final_norm, e.map(|e| e.l2), e.map(|e| e.h1), e.map(|e| e.div), Some(report.max_div)];
    let secs = report.wall_time.as_secs_f64();
    let mut c = vec![full(Some(report.config.tau)), report.config.n_steps.to_string(), status(&report)];
    c.extend(vals.iter().map(|&v| full(v)));
    c.push(full(Some(secs)));
    let mut m = vec![tau_label(report.config.tau), report.config.n_steps.to_string(), status(&report)];
    m.extend(vals.iter().map(|&v| sci3(v)));
    m.push(fix3(Some(secs)));
    summary.push(c, m);

    emit(cfg, "single-run", &[("", &summary), ("_steps", &steps)], &[&summary, &steps])?;
    Ok(if report.completed() { EXIT_OK } else { EXIT_BLOW_UP })
}

pub fn convergence(cfg: &ExperimentConfig) -> Result<i32> {
    if cfg.cfl_form() == CflForm::Search {
        bail!("convergence needs a fixed --cfl schedule (std or fourthirds)");
    }
    let problem = taylor_green(cfg.nu)?;
    let table = convergence_study(&study(cfg, cfg.n_list.clone()), &problem)?;
    let mut t = Table::new(
        "Errors and rates",
        &[
            ("n", "h"),
            ("tau", "τ"),
            ("status", "status"),
            ("l2_error", "‖u−u_h‖_{L²}"),
            ("l2_rate", "Rate"),
            ("h1_error", "‖∇_h(u−u_h)‖_{L²}"),
            ("h1_rate", "Rate"),
            ("max_div", "max ‖∇_h·u_h‖"),
        ],
    );
    for row in &table.rows {
        let r = &row.report;
        let e = r.final_errors;
        let div = r.completed().then_some(r.max_div);
        t.push(
            vec![
                row.n.to_string(),
                full(Some(r.config.tau)),
                status(r),
                full(e.map(|e| e.l2)),
                full(row.l2_rate),
                full(e.map(|e| e.h1)),
                full(row.h1_rate),
                full(div),
            ],
            vec![
                format!("1/{}", row.n),
                sci3(Some(r.config.tau)),
                status(r),
                sci3(e.map(|e| e.l2)),
                if row.l2_rate.is_some() || !r.completed() { fix3(row.l2_rate) } else { "-".into() },
                sci3(e.map(|e| e.h1)),
                if row.h1_rate.is_some() || !r.completed() { fix3(row.h1_rate) } else { "-".into() },
                sci3(div),
            ],
        );
    }
    emit(cfg, "convergence", &[("", &t)], &[&t])?;
    Ok(EXIT_OK)
}

pub fn cfl_sweep_cmd(cfg: &ExperimentConfig) -> Result<i32> {
    let problem = taylor_green(cfg.nu)?;
    let sweep = cfl_sweep(&study(cfg, cfg.n_list.clone()), &problem)?;
    let mut t = Table::new(
        "Maximum stable time steps",
        &[
            ("n", "h"),
            ("tau_max", "τ_max"),
            ("tau_max_label", "τ_max"),
            ("alpha", "α"),
            ("l2_error", "‖u−u_h‖_{L²}"),
            ("h1_error", "‖∇_h(u−u_h)‖_{L²}"),
            ("max_div", "max ‖∇_h·u_h‖"),
        ],
    );
    for row in &sweep.rows {
        let e = row.report.as_ref().and_then(|r| r.final_errors);
        let div = row.report.as_ref().map(|r| r.max_div);
        let label = row.tau_max.map_or("nan".into(), tau_label);
        t.push(
            vec![
                row.n.to_string(),
                full(row.tau_max),
                label.clone(),
                full(row.alpha),
                full(e.map(|e| e.l2)),
                full(e.map(|e| e.h1)),
                full(div),
            ],
            vec![
                format!("1/{}", row.n),
                sci3(row.tau_max),
                label,
                if row.alpha.is_some() { fix3(row.alpha) } else { "-".into() },
                sci3(e.map(|e| e.l2)),
                sci3(e.map(|e| e.h1)),
                sci3(div),
            ],
        );
    }
    let mut trace = Table::new(
        "Search trace",
        &[("n", "h"), ("tau", "τ"), ("tau_label", "τ"), ("stable", "stable"), ("blow_up_step", "blow-up step")],
    );
    for tr in &sweep.trace {
        let step = tr.blow_up.map_or("-".into(), |s| s.to_string());
        trace.push(
            vec![tr.n.to_string(), full(Some(tr.tau)), tau_label(tr.tau), tr.stable.to_string(), step.clone()],
            vec![format!("1/{}", tr.n), sci3(Some(tr.tau)), tau_label(tr.tau), tr.stable.to_string(), step],
        );
    }
    emit(cfg, "cfl-sweep", &[("", &t), ("_trace", &trace)], &[&t, &trace])?;
    Ok(EXIT_OK)
}

pub fn compare_cn(cfg: &ExperimentConfig) -> Result<i32> {
    let disc = discretization(cfg, cfg.n)?;
    let problem = taylor_green(cfg.nu)?;
    let cols = [
        ("scheme", "scheme"),
        ("tau", "τ"),
        ("status", "status"),
        ("l2_norm", "‖u_h‖_{L²}"),
        ("l2_error", "‖u−u_h‖_{L²}"),
        ("h1_error", "‖∇_h(u−u_h)‖_{L²}"),
        ("div_norm", "‖∇_h·u_h‖_{L²}"),
    ];
    let mut csv_rows = Table::new("all", &cols);
    let mut blocks = Vec::new();
    for (name, kind) in [("rk2", IntegratorKind::ExplicitRk2), ("cn", IntegratorKind::SemiImplicitCn)] {
        let title = match kind {
            IntegratorKind::ExplicitRk2 => "Explicit second-order RK",
            IntegratorKind::SemiImplicitCn => "Semi-implicit CN",
        };
        let mut block = Table::new(title, &cols);
        for &tau in &cfg.tau_list {
            let r = run(&disc, &problem, scheme(cfg, tau, kind)?)?;
            let e = r.final_errors;
            let vals = [r.final_norm, e.map(|e| e.l2), e.map(|e| e.h1), e.map(|e| e.div)];
            let mut c = vec![name.to_string(), full(Some(r.config.tau)), status(&r)];
            c.extend(vals.iter().map(|&v| full(v)));
            let mut m = vec![name.to_string(), tau_label(r.config.tau), status(&r)];
            m.extend(vals.iter().map(|&v| sci3(v)));
            csv_rows.push(c.clone(), m.clone());
            block.push(c, m);
        }
        blocks.push(block);
    }
    // one CSV with both blocks stacked; the Markdown shows them as separate tables
    emit(cfg, "compare-cn", &[("", &csv_rows)], &[&blocks[0], &blocks[1]])?;
    Ok(EXIT_OK)
}
