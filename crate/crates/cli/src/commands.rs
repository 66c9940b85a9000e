use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use geosampling::chaotic::{run_chaotic, Anchor, MoveKind, MoveParams, StripChoice, Trace};
use geosampling::design::draw_at;
use geosampling::estimator::{self, Criterion, EstimateReport};
use geosampling::layout::{equal_fip, fip_from_aux, layout_from_offsets, madow_layout, random_layout, round_to_grid, GridFip};
use geosampling::optimizer::{search, SearchParams, SearchReport};
use geosampling::oracle::{maxent_design, poisson_design, srs_sip, total_variation, ReferenceDesign};
use geosampling::{BarLayout, Design, Execution, LayoutDocument, Population, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::ingest::{read_population, ColumnMap};
use crate::{
    AnchorArg, ChaoticArgs, ChoiceArg, Cli, Command, ConstructArgs, ConstructMode, DrawArgs, EvaluateArgs, FipArgs,
    Format, MoveMode, OptimizeArgs, OracleArgs, OracleKind, PlotArgs, PopArgs, ReferenceArg,
};

/// A command result in both output formats.
struct Report {
    json: Value,
    text: String,
}

pub fn dispatch(cli: &Cli) -> Result<String> {
    let report = match &cli.command {
        Command::Construct(a) => construct(a)?,
        Command::Chaotic(a) => chaotic(a)?,
        Command::Draw(a) => draw(a)?,
        Command::Evaluate(a) => evaluate(a)?,
        Command::Optimize(a) => optimize(a)?,
        Command::Oracle(a) => oracle(a)?,
        Command::Plot(a) => return plot(a),
    };
    Ok(match cli.format {
        Format::Json => serde_json::to_string_pretty(&report.json)? + "\n",
        Format::Text => report.text,
    })
}

pub fn read_layout(path: &Path) -> Result<BarLayout> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let doc: LayoutDocument =
        serde_json::from_str(&text).with_context(|| format!("{} is not a layout document", path.display()))?;
    Ok(BarLayout::from_document(&doc)?)
}

pub fn layout_json(layout: &BarLayout) -> String {
    serde_json::to_string_pretty(&layout.to_document()).expect("layout documents serialize") + "\n"
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn load_population(args: &PopArgs) -> Result<Option<Population>> {
    let Some(path) = &args.pop else {
        return Ok(None);
    };
    let columns = ColumnMap {
        id: args.id_col.clone(),
        y: args.y_col.clone(),
        x: args.x_col.clone(),
        z: args.z_col.clone(),
    };
    read_population(path, &columns, &args.exclude_ids)
        .with_context(|| format!("cannot load population {}", path.display()))
        .map(Some)
}

/// Inclusion probabilities from `--pi` or from a population.
fn grid_fip(args: &FipArgs, pop: Option<&Population>) -> Result<GridFip> {
    if let Some(pi) = &args.pi {
        if pop.is_some() {
            bail!("give either --pi or --pop, not both");
        }
        return Ok(round_to_grid(pi, args.grid)?);
    }
    let pop = pop.ok_or_else(|| anyhow!("inclusion probabilities need --pi or --pop"))?;
    let n = args.size.ok_or_else(|| anyhow!("--size is required with --pop"))?;
    Ok(match &pop.x {
        Some(x) => fip_from_aux(x, n, args.grid)?,
        None => equal_fip(pop.len(), n, args.grid)?,
    })
}

fn labels(sample: &Sample) -> Vec<usize> {
    sample.labels()
}

#[derive(Serialize)]
struct SampleRow {
    sample: Vec<usize>,
    cells: u64,
    probability: f64,
}

fn design_rows(design: &Design) -> Vec<SampleRow> {
    let g = design.grid() as f64;
    design
        .iter()
        .map(|(s, m)| SampleRow {
            sample: labels(s),
            cells: m.0,
            probability: m.0 as f64 / g,
        })
        .collect()
}

fn sample_table(rows: &[SampleRow]) -> String {
    let mut out = String::from("sample                 cells  probability\n");
    for r in rows {
        let _ = writeln!(out, "{:<20} {:>7}  {:.6}", fmt_labels(&r.sample), r.cells, r.probability);
    }
    out
}

fn fmt_labels(labels: &[usize]) -> String {
    let inner: Vec<String> = labels.iter().map(usize::to_string).collect();
    format!("{{{}}}", inner.join(","))
}

fn construct(args: &ConstructArgs) -> Result<Report> {
    let pop = load_population(&args.fip.pop)?;
    let fip = grid_fip(&args.fip, pop.as_ref())?;
    let grid = args.fip.grid;
    let layout = match args.mode {
        ConstructMode::Madow => madow_layout(&fip.fip, grid)?,
        ConstructMode::Random => {
            let seed = args.seed.ok_or_else(|| anyhow!("--mode random requires --seed"))?;
            random_layout(&fip.fip, grid, &mut ChaCha8Rng::seed_from_u64(seed))?
        }
        ConstructMode::Offsets => {
            let offsets = args.offsets.as_ref().ok_or_else(|| anyhow!("--mode offsets requires --offsets"))?;
            layout_from_offsets(&fip.fip, offsets, grid)?
        }
    };
    let design = Design::from_layout(&layout);
    let fixed = design.fixed_size();
    let mut json = json!({
        "command": "construct",
        "grid": grid,
        "units": layout.n_units(),
        "fip_cells": fip.fip.iter().map(|m| m.0).collect::<Vec<_>>(),
        "max_rounding_residual": fip.max_residual,
        "total_rounding_residual": fip.total_residual,
        "intervals": layout.interval_count(),
        "samples": design.len(),
        "fixed_size": fixed,
    });
    let mut text = format!(
        "layout: {} units, grid {grid}, {} intervals, {} samples, {}\nrounding residual: max {:.3e}, total {:.3e}\n",
        layout.n_units(),
        layout.interval_count(),
        design.len(),
        fixed.map_or("random size".to_string(), |n| format!("fixed size {n}")),
        fip.max_residual,
        fip.total_residual,
    );
    match &args.out {
        Some(path) => {
            write_file(path, &layout_json(&layout))?;
            let _ = writeln!(text, "written to {}", path.display());
        }
        None => {
            json["layout"] = serde_json::to_value(layout.to_document())?;
            text.push_str(&layout_json(&layout));
        }
    }
    Ok(Report { json, text })
}

fn strip_choice(arg: ChoiceArg) -> StripChoice {
    match arg {
        ChoiceArg::Uniform => StripChoice::Uniform,
        ChoiceArg::Mass => StripChoice::MassWeighted,
        ChoiceArg::Unit => StripChoice::UnitFirst,
    }
}

fn reference_design(kind: ReferenceArg, layout: &BarLayout) -> Result<ReferenceDesign> {
    let fip = layout.fip_f64();
    Ok(match kind {
        ReferenceArg::Poisson => poisson_design(&fip)?,
        ReferenceArg::Maxent => {
            let n = layout
                .integer_size()
                .ok_or_else(|| anyhow!("the maximum-entropy reference needs a whole expected sample size"))?;
            maxent_design(&fip, n as usize)?
        }
    })
}

fn trace_text(trace: &Trace) -> String {
    let mut out = String::from("moves   applied  entropy   strips  sizes    gap/tv\n");
    for r in &trace.rows {
        let extra = match (r.independence_gap, r.tv_to_reference) {
            (Some(g), Some(t)) => format!("gap {g:.5} tv {t:.5}"),
            (Some(g), None) => format!("gap {g:.5}"),
            (None, Some(t)) => format!("tv {t:.5}"),
            (None, None) => String::new(),
        };
        let _ = writeln!(
            out,
            "{:<7} {:<8} {:<9.5} {:<7} {}..{:<5} {extra}",
            r.moves, r.applied, r.entropy, r.strips, r.min_size, r.max_size
        );
    }
    out
}

fn chaotic(args: &ChaoticArgs) -> Result<Report> {
    let layout = read_layout(&args.input)?;
    let kind = match args.mode {
        MoveMode::Free => MoveKind::Free,
        MoveMode::Fixed => MoveKind::Fixed,
    };
    let params = MoveParams {
        anchor: match args.anchor {
            AnchorArg::Bottom => Anchor::Bottom,
            AnchorArg::Random => Anchor::Random,
        },
        choice: strip_choice(args.strip_choice),
        checkpoints: args.checkpoints,
        ..MoveParams::new(args.alpha, args.iters, args.seed)
    };
    let reference = args.reference.map(|r| reference_design(r, &layout)).transpose()?;
    let (out, trace) = run_chaotic(layout, &params, kind, reference.as_ref())?;
    out.validate()?;
    let json = json!({
        "command": "chaotic",
        "mode": kind,
        "alpha": args.alpha,
        "iterations": args.iters,
        "seed": args.seed,
        "trace": trace,
        "intervals": out.interval_count(),
    });
    let mut text = format!(
        "{} moves ({:?}), alpha {}: {} applied, {} zero-width, {} without candidate\n",
        args.iters, kind, args.alpha, trace.applied, trace.skipped_zero_width, trace.skipped_no_candidate
    );
    text.push_str(&trace_text(&trace));
    if let Some(path) = &args.out {
        write_file(path, &layout_json(&out))?;
        let _ = writeln!(text, "written to {}", path.display());
    }
    Ok(Report { json, text })
}

fn draw(args: &DrawArgs) -> Result<Report> {
    let layout = read_layout(&args.input)?;
    let cell = match (args.seed, args.cell) {
        (_, Some(c)) => c,
        (Some(seed), None) => ChaCha8Rng::seed_from_u64(seed).random_range(0..layout.grid()),
        (None, None) => bail!("give --seed or --cell"),
    };
    let sample = draw_at(&layout, cell)?;
    let u = cell as f64 / layout.grid() as f64;
    let json = json!({
        "command": "draw",
        "cell": cell,
        "position": u,
        "sample": labels(&sample),
    });
    let text = format!("line at cell {cell} ({u:.6}): sample {sample}\n");
    Ok(Report { json, text })
}

fn evaluate(args: &EvaluateArgs) -> Result<Report> {
    let layout = read_layout(&args.input)?;
    let design = Design::from_layout(&layout);
    let sip = design.second_order();
    let n = layout.n_units();
    let rows = design_rows(&design);
    let mut json = json!({
        "command": "evaluate",
        "grid": layout.grid(),
        "units": n,
        "samples": design.len(),
        "fixed_size": design.fixed_size(),
        "expected_size": design.expected_size(),
        "size_variance": design.size_variance(),
        "entropy": design.entropy(),
        "design": rows,
        "fip_cells": sip.fip().iter().map(|m| m.0).collect::<Vec<_>>(),
        "sip_cells": (0..n).map(|k| (0..n).map(|l| sip.get(k, l).0).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "zero_pairs": sip.zero_pairs().iter().map(|&(k, l)| [k + 1, l + 1]).collect::<Vec<_>>(),
        "max_independence_gap": sip.max_independence_gap(),
    });
    let mut text = format!(
        "{n} units, grid {}, {} samples, {}\nentropy {:.6} nats, expected size {:.6}, size variance {:.6}\n",
        layout.grid(),
        design.len(),
        design.fixed_size().map_or("random size".into(), |k| format!("fixed size {k}")),
        design.entropy(),
        design.expected_size(),
        design.size_variance(),
    );
    text.push_str(&sample_table(&rows));
    text.push_str("joint inclusion (cells)\n");
    for k in 0..n {
        let row: Vec<String> = (0..n).map(|l| format!("{:>6}", sip.get(k, l).0)).collect();
        let _ = writeln!(text, "{:>3} {}", k + 1, row.join(" "));
    }
    let _ = writeln!(text, "zero joint probabilities: {} pairs", sip.zero_pairs().len());

    let pop = load_population(&args.pop)?;
    let mut variables: Vec<(&str, Vec<f64>)> = Vec::new();
    if let Some(v) = &args.values {
        variables.push(("y", v.clone()));
    }
    if let Some(p) = &pop {
        if p.len() != n {
            bail!("population has {} units but the layout has {n}", p.len());
        }
        if let Some(y) = &p.y {
            variables.push(("y", y.clone()));
        }
        if let Some(z) = &p.z {
            variables.push(("z", z.clone()));
        }
    }
    let sample = args.sample.as_ref().map(|l| Sample::from_labels(l.iter().copied()));
    for (name, values) in variables {
        let variance = estimator::design_variance(&design, &values)?;
        let mut entry = json!({
            "total": values.iter().sum::<f64>(),
            "variance": variance,
        });
        let mut line = format!("{name}: total {:.6}, variance {:.6e}", values.iter().sum::<f64>(), variance);
        for c in Criterion::ALL {
            let v = estimator::criterion(&design, &values, c)?;
            entry[c.to_string()] = json!(v);
            let _ = write!(line, ", {c} {v:.6e}");
        }
        if let Some(s) = &sample {
            let r = EstimateReport::new(&design, s, &values)?;
            entry["sample"] = json!(labels(s));
            entry["estimate"] = serde_json::to_value(&r)?;
            let _ = write!(line, "\n  sample {s}: estimate {:.6}", r.total_estimate);
            match r.variance_estimate {
                Some(v) => {
                    let _ = write!(line, ", variance estimate {v:.6e}");
                }
                None => line.push_str(", variance estimate unavailable (zero joint probability)"),
            }
        }
        json[name] = entry;
        text.push_str(&line);
        text.push('\n');
    }
    Ok(Report { json, text })
}

fn optimize(args: &OptimizeArgs) -> Result<Report> {
    let pop = load_population(&args.fip.pop)?.ok_or_else(|| anyhow!("optimize needs --pop"))?;
    let fip = grid_fip(&args.fip, Some(&pop))?;
    let z = pop
        .evaluation()
        .ok_or_else(|| anyhow!("optimize needs an evaluation variable (--z-col or --y-col)"))?
        .to_vec();
    let params = SearchParams {
        max_open_set_size: args.open_max,
        moves_per_candidate: args.moves_per_candidate,
        alpha: args.alpha,
        criterion: args.criterion,
        choice: strip_choice(args.strip_choice),
        ..SearchParams::new(args.lambda, args.nodes, args.seed)
    };
    let started = std::time::Instant::now();
    let result = search(&z, &fip.fip, args.fip.grid, &params, Execution::default())?;
    eprintln!("search finished in {:.2?}", started.elapsed());
    let SearchReport {
        initial_cost,
        best_cost,
        ..
    } = result.report;
    let ef = estimator::efficiency(initial_cost, best_cost);
    let mut json = json!({
        "command": "optimize",
        "units": pop.len(),
        "grid": args.fip.grid,
        "lambda": args.lambda,
        "nodes": args.nodes,
        "open_max": args.open_max,
        "moves_per_candidate": args.moves_per_candidate,
        "alpha": args.alpha,
        "seed": args.seed,
        "search": result.report,
        "efficiency_z": ef,
    });
    let mut text = format!(
        "{} iterations, {} expanded, {} candidates, {} duplicates, {} evicted{}\n{} initial {initial_cost:.6e}, best {best_cost:.6e}, efficiency {ef:.3}\n",
        result.report.iterations_run,
        result.report.expanded,
        result.report.candidates,
        result.report.duplicates,
        result.report.evicted,
        if result.report.terminated_early { " (open set exhausted)" } else { "" },
        args.criterion,
    );
    if let (Some(y), Some(_)) = (&pop.y, &pop.z) {
        let initial = Design::from_layout(&madow_layout(&fip.fip, args.fip.grid)?);
        let best = Design::from_layout(&result.best);
        let v0 = estimator::design_variance(&initial, y)?;
        let v1 = estimator::design_variance(&best, y)?;
        let ef_y = estimator::efficiency(v0, v1);
        json["variance_y_initial"] = json!(v0);
        json["variance_y_best"] = json!(v1);
        json["efficiency_y"] = json!(ef_y);
        let _ = writeln!(text, "y variance initial {v0:.6e}, best {v1:.6e}, efficiency {ef_y:.3}");
    }
    if let Some(path) = &args.out {
        write_file(path, &layout_json(&result.best))?;
        let _ = writeln!(text, "written to {}", path.display());
    }
    Ok(Report { json, text })
}

fn oracle(args: &OracleArgs) -> Result<Report> {
    let layout = args.input.as_deref().map(read_layout).transpose()?;
    let fip: Vec<f64> = match &layout {
        Some(l) => l.fip_f64(),
        None => {
            let pop = load_population(&args.fip.pop)?;
            match (&args.fip.pi, &pop) {
                (Some(pi), None) => pi.clone(),
                (None, None) if args.kind == OracleKind::Srs => Vec::new(),
                _ => {
                    let g = grid_fip(&args.fip, pop.as_ref())?;
                    g.fip.iter().map(|m| m.to_f64(g.grid)).collect()
                }
            }
        }
    };
    if args.kind == OracleKind::Srs {
        let units = args.units.or((!fip.is_empty()).then_some(fip.len()));
        let units = units.ok_or_else(|| anyhow!("--kind srs needs --units or probabilities"))?;
        let size = match args.fip.size {
            Some(n) => n,
            None => {
                let total: f64 = fip.iter().sum();
                if fip.is_empty() || (total - total.round()).abs() > 1e-9 {
                    bail!("--kind srs needs --size");
                }
                total.round() as usize
            }
        };
        let sip = srs_sip(units, size)?;
        let json = json!({
            "command": "oracle",
            "kind": "srs",
            "units": units,
            "size": size,
            "first_order": sip.get(0, 0),
            "joint": if units > 1 { sip.get(0, 1) } else { sip.get(0, 0) },
        });
        let text = format!(
            "simple random sampling of {size} from {units}: pi_k = {:.9}, pi_kl = {:.9}\n",
            sip.get(0, 0),
            if units > 1 { sip.get(0, 1) } else { sip.get(0, 0) }
        );
        return Ok(Report { json, text });
    }
    let reference = match args.kind {
        OracleKind::Poisson => poisson_design(&fip)?,
        _ => {
            let total: f64 = fip.iter().sum();
            let n = args.fip.size.unwrap_or(total.round() as usize);
            maxent_design(&fip, n)?
        }
    };
    let mut rows: Vec<(Vec<usize>, f64)> = reference.iter().map(|(s, p)| (labels(s), p)).collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows.truncate(args.limit.unwrap_or(usize::MAX));
    let recovered = reference.first_order();
    let fip_error = recovered.iter().zip(&fip).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut json = json!({
        "command": "oracle",
        "kind": reference.kind(),
        "units": fip.len(),
        "samples": reference.len(),
        "entropy": reference.entropy(),
        "max_fip_error": fip_error,
        "design": rows.iter().map(|(s, p)| json!({"sample": s, "probability": p})).collect::<Vec<_>>(),
    });
    let mut text = format!(
        "{:?} reference: {} samples, entropy {:.6} nats, max first-order error {fip_error:.3e}\n",
        reference.kind(),
        reference.len(),
        reference.entropy()
    );
    for (s, p) in &rows {
        let _ = writeln!(text, "{:<20} {p:.9}", fmt_labels(s));
    }
    if let Some(l) = &layout {
        let design = Design::from_layout(l);
        let tv = total_variation(&design, &reference)?;
        json["layout_entropy"] = json!(design.entropy());
        json["total_variation"] = json!(tv);
        let _ = writeln!(text, "layout entropy {:.6}, total variation {tv:.6}", design.entropy());
    }
    Ok(Report { json, text })
}

fn plot(args: &PlotArgs) -> Result<String> {
    let layout = read_layout(&args.input)?;
    let svg = crate::svg::render(&layout);
    match &args.out {
        Some(path) => {
            write_file(path, &svg)?;
            Ok(String::new())
        }
        None => Ok(svg),
    }
}
