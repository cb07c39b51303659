use std::fs;
use std::path::{Path, PathBuf};

use fsfgw::io::{
    dendrogram_json, format_float, plan_comparison_json, read_object, read_plan, read_precinct_graph,
    solve_result_json, write_distance_matrix, write_json, write_table,
};
use fsfgw::pipelines::cluster::complete_linkage;
use fsfgw::pipelines::pairwise::pairwise_distance_matrix;
use fsfgw::pipelines::redistrict::{compare_plans, plan_distance_matrix, PrecinctGraph, RedistrictingPlan};
use fsfgw::pipelines::synthetic::{generate_synthetic_pair, roc_sweep, separation_metric, SyntheticSpec};
use fsfgw::{solve_fsfgw, FeatureNorm, FsFgwConfig, FsFgwError, Mode, Result};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{parse_deltas, GraphArgs, SolverArgs, SpecArgs};

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: &'a FsFgwConfig,
    input_paths: Vec<String>,
    output_dir: String,
    seed: u64,
    tool_version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    synthetic: Option<&'a SyntheticSpec>,
}

fn path_text(p: &Path) -> String {
    p.display().to_string()
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn write_manifest(
    command: &str,
    config: &FsFgwConfig,
    inputs: &[PathBuf],
    out: &Path,
    synthetic: Option<&SyntheticSpec>,
) -> Result<()> {
    let manifest = RunManifest {
        command,
        config,
        input_paths: inputs.iter().map(|p| path_text(p)).collect(),
        output_dir: path_text(out),
        seed: config.seed,
        tool_version: env!("CARGO_PKG_VERSION"),
        synthetic,
    };
    write_json(&out.join("manifest.json"), &serde_json::to_value(&manifest)?)
}

fn feature_label(names: Option<&Vec<String>>, r: usize) -> String {
    names.and_then(|n| n.get(r).cloned()).unwrap_or_else(|| format!("f{r}"))
}

pub fn solve(x_path: &Path, y_path: &Path, args: &SolverArgs) -> Result<()> {
    let x = read_object(x_path)?;
    let y = read_object(y_path)?;
    let cfg = args.config(x.d(), FeatureNorm::PerPair, None)?;
    prepare_out(&args.out)?;
    let res = solve_fsfgw(&x, &y, &cfg)?;
    write_json(&args.out.join("result.json"), &solve_result_json(&res))?;
    write_table(
        &args.out.join("weights.csv"),
        &["feature", "name", "weight", "score"],
        (0..x.d()).map(|r| {
            vec![
                r.to_string(),
                feature_label(x.feature_names.as_ref(), r),
                format_float(res.weights.values[r]),
                format_float(res.scores[r]),
            ]
        }),
    )?;
    write_manifest("solve", &cfg, &[x_path.to_path_buf(), y_path.to_path_buf()], &args.out, None)?;
    println!(
        "objective {} converged {} outer_iters {} lambda {}",
        format_float(res.objective),
        res.converged,
        res.outer_iters,
        format_float(res.lambda_used)
    );
    Ok(())
}

fn spec_of(spec: &SpecArgs, seed: u64) -> Result<SyntheticSpec> {
    let s = SyntheticSpec {
        n: spec.n,
        d: spec.d,
        k: spec.k,
        delta: spec.delta,
        geo_radius: spec.radius,
        seed,
    };
    s.validate()?;
    Ok(s)
}

fn synthetic_config(args: &SolverArgs, spec: &SyntheticSpec) -> Result<FsFgwConfig> {
    let groups = match args.mode {
        Mode::GroupSimplex => Some(spec.correct_groups()?),
        _ => None,
    };
    args.config(spec.d, FeatureNorm::PerFeature, groups)
}

pub fn synthetic_recover(spec_args: &SpecArgs, args: &SolverArgs) -> Result<()> {
    let spec = spec_of(spec_args, args.seed)?;
    let cfg = synthetic_config(args, &spec)?;
    prepare_out(&args.out)?;
    let pair = generate_synthetic_pair(&spec)?;
    let res = solve_fsfgw(&pair.x, &pair.y, &cfg)?;
    let separation = if pair.differentiating.is_empty() || spec.k == spec.d {
        None
    } else {
        Some(separation_metric(&res.weights.values, &pair.differentiating)?)
    };
    write_json(&args.out.join("result.json"), &solve_result_json(&res))?;
    write_table(
        &args.out.join("weights.csv"),
        &["feature", "differentiating", "weight", "score"],
        (0..spec.d).map(|r| {
            vec![
                r.to_string(),
                pair.differentiating.contains(&r).to_string(),
                format_float(res.weights.values[r]),
                format_float(res.scores[r]),
            ]
        }),
    )?;
    let sep_text = separation.map_or_else(|| "nan".to_string(), format_float);
    write_table(
        &args.out.join("recover.csv"),
        &["mode", "delta", "seed", "separation", "objective", "lambda", "converged"],
        [vec![
            cfg.mode.to_string(),
            format_float(spec.delta),
            spec.seed.to_string(),
            sep_text.clone(),
            format_float(res.objective),
            format_float(res.lambda_used),
            res.converged.to_string(),
        ]],
    )?;
    write_manifest("synthetic recover", &cfg, &[], &args.out, Some(&spec))?;
    println!("separation {sep_text} objective {} converged {}", format_float(res.objective), res.converged);
    Ok(())
}

pub fn synthetic_delta_sweep(
    spec_args: &SpecArgs,
    deltas: &str,
    modes: &[Mode],
    reps: u64,
    args: &SolverArgs,
) -> Result<()> {
    let deltas = parse_deltas(deltas)?;
    if modes.is_empty() || reps == 0 {
        return Err(FsFgwError::InvalidConfig("need at least one mode and one repetition".into()));
    }
    let base = spec_of(spec_args, args.seed)?;
    if base.k == 0 || base.k == base.d {
        return Err(FsFgwError::InvalidConfig("separation needs 0 < k < d".into()));
    }
    let configs = modes
        .iter()
        .map(|&mode| {
            let mut a = args.clone();
            a.mode = mode;
            if !mode.is_penalized() {
                a.lambda = None;
                a.fraction = None;
            }
            synthetic_config(&a, &base)
        })
        .collect::<Result<Vec<_>>>()?;
    for &delta in &deltas {
        spec_of(&SpecArgs { delta, ..spec_args.clone() }, args.seed)?;
    }
    prepare_out(&args.out)?;

    let jobs: Vec<(usize, usize, u64)> = (0..deltas.len())
        .flat_map(|i| (0..configs.len()).flat_map(move |m| (0..reps).map(move |r| (i, m, r))))
        .collect();
    let separations = jobs
        .par_iter()
        .map(|&(i, m, r)| {
            let spec = SyntheticSpec {
                delta: deltas[i],
                seed: base.seed + r,
                ..base.clone()
            };
            let pair = generate_synthetic_pair(&spec)?;
            let res = solve_fsfgw(&pair.x, &pair.y, &configs[m])?;
            info!("delta {} mode {} seed {} done", spec.delta, configs[m].mode, spec.seed);
            separation_metric(&res.weights.values, &pair.differentiating)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut rows = Vec::new();
    for (chunk, (i, m)) in separations
        .chunks(reps as usize)
        .zip((0..deltas.len()).flat_map(|i| (0..configs.len()).map(move |m| (i, m))))
    {
        let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
        let min = chunk.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = chunk.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        rows.push(vec![
            format_float(deltas[i]),
            configs[m].mode.to_string(),
            reps.to_string(),
            format_float(mean),
            format_float(min),
            format_float(max),
        ]);
    }
    write_table(
        &args.out.join("delta_sweep.csv"),
        &["delta", "mode", "reps", "separation", "separation_min", "separation_max"],
        rows,
    )?;
    let cfg = &configs[0];
    write_manifest("synthetic delta-sweep", cfg, &[], &args.out, Some(&base))?;
    println!("{} rows written to {}", deltas.len() * configs.len(), path_text(&args.out.join("delta_sweep.csv")));
    Ok(())
}

pub fn synthetic_roc(spec_args: &SpecArgs, fracs: &[f64], args: &SolverArgs) -> Result<()> {
    let spec = spec_of(spec_args, args.seed)?;
    let mut a = args.clone();
    a.lambda = None;
    a.fraction = None;
    let cfg = synthetic_config(&a, &spec)?;
    if fracs.is_empty() {
        return Err(FsFgwError::InvalidConfig("need at least one fraction".into()));
    }
    if args.lambda.is_some() {
        return Err(FsFgwError::InvalidConfig("roc sweeps fractions; --lambda is not allowed".into()));
    }
    prepare_out(&args.out)?;
    let curve = roc_sweep(&spec, &cfg, fracs)?;
    write_table(
        &args.out.join("roc.csv"),
        &["f", "tpr", "fpr"],
        curve
            .points
            .iter()
            .map(|p| vec![format_float(p.fraction), format_float(p.tpr), format_float(p.fpr)]),
    )?;
    write_table(
        &args.out.join("auc.csv"),
        &["mode", "auc"],
        [vec![cfg.mode.to_string(), format_float(curve.auc)]],
    )?;
    write_manifest("synthetic roc", &cfg, &[], &args.out, Some(&spec))?;
    println!("AUC {}", format_float(curve.auc));
    Ok(())
}

fn object_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(FsFgwError::EmptySet(format!("no .json object files in {}", path_text(dir))));
    }
    Ok(files)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn pairwise(dir: &Path, args: &SolverArgs) -> Result<()> {
    let files = object_files(dir)?;
    let objects = files.iter().map(|f| read_object(f)).collect::<Result<Vec<_>>>()?;
    let d = objects[0].d();
    let cfg = args.config(d, FeatureNorm::PerPair, None)?;
    prepare_out(&args.out)?;
    let ids: Vec<String> = files.iter().map(|f| stem(f)).collect();
    let res = pairwise_distance_matrix(&objects, &cfg)?;
    write_distance_matrix(&args.out.join("distances.csv"), &ids, &res.distances)?;
    let mut header = vec!["i", "j", "object_i", "object_j", "objective", "lambda", "converged", "outer_iters"];
    let weight_cols: Vec<String> = (0..d).map(|r| feature_label(objects[0].feature_names.as_ref(), r)).collect();
    header.extend(weight_cols.iter().map(String::as_str));
    write_table(
        &args.out.join("pair_weights.csv"),
        &header,
        res.records.iter().map(|rec| {
            let mut row = vec![
                rec.i.to_string(),
                rec.j.to_string(),
                ids[rec.i].clone(),
                ids[rec.j].clone(),
                format_float(rec.objective),
                format_float(rec.lambda),
                rec.converged.to_string(),
                rec.outer_iters.to_string(),
            ];
            row.extend(rec.weights.iter().map(|&w| format_float(w)));
            row
        }),
    )?;
    write_manifest("pairwise", &cfg, &files, &args.out, None)?;
    println!("{0}x{0} distance matrix written to {1}", ids.len(), path_text(&args.out.join("distances.csv")));
    Ok(())
}

fn load_graph(graph: &GraphArgs) -> Result<PrecinctGraph> {
    read_precinct_graph(&graph.nodes, &graph.edges)
}

fn plan_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inside: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.is_file()
                        && f.extension().is_some_and(|e| e == "csv")
                        && f.file_name().is_some_and(|n| n.to_string_lossy().starts_with("plan_"))
                })
                .collect();
            inside.sort();
            out.extend(inside);
        } else {
            out.push(p.clone());
        }
    }
    if out.len() < 2 {
        return Err(FsFgwError::EmptySet(format!("need at least 2 plan files, got {}", out.len())));
    }
    Ok(out)
}

fn inputs_with_graph(graph: &GraphArgs, plans: &[PathBuf]) -> Vec<PathBuf> {
    let mut v = vec![graph.nodes.clone(), graph.edges.clone()];
    v.extend(plans.iter().cloned());
    v
}

pub fn redistrict_compare(graph_args: &GraphArgs, a: &Path, b: &Path, args: &SolverArgs) -> Result<()> {
    let graph = load_graph(graph_args)?;
    let cfg = args.config(graph.feature_names.len(), FeatureNorm::PerPair, None)?;
    let p = read_plan(a, &graph)?;
    let q = read_plan(b, &graph)?;
    prepare_out(&args.out)?;
    let cmp = compare_plans(&graph, &p, &q, &cfg)?;
    write_json(&args.out.join("comparison.json"), &plan_comparison_json(&cmp))?;
    let mut header = vec!["district_a", "district_b"];
    header.extend(graph.feature_names.iter().map(String::as_str));
    write_table(
        &args.out.join("weights_heatmap.csv"),
        &header,
        cmp.matching.iter().enumerate().map(|(k, &(i, j))| {
            let mut row = vec![p.district_labels[i].clone(), q.district_labels[j].clone()];
            row.extend(cmp.weight_matrix.row(k).iter().map(|&w| format_float(w)));
            row
        }),
    )?;
    write_manifest(
        "redistrict compare",
        &cfg,
        &inputs_with_graph(graph_args, &[a.to_path_buf(), b.to_path_buf()]),
        &args.out,
        None,
    )?;
    println!("total_distance {}", format_float(cmp.total_distance));
    Ok(())
}

fn load_plans(graph: &PrecinctGraph, paths: &[PathBuf]) -> Result<(Vec<PathBuf>, Vec<RedistrictingPlan>)> {
    let files = plan_files(paths)?;
    let plans = files.iter().map(|f| read_plan(f, graph)).collect::<Result<Vec<_>>>()?;
    Ok((files, plans))
}

pub fn redistrict_matrix(graph_args: &GraphArgs, paths: &[PathBuf], args: &SolverArgs, cluster: bool) -> Result<()> {
    let graph = load_graph(graph_args)?;
    let cfg = args.config(graph.feature_names.len(), FeatureNorm::PerPair, None)?;
    let (files, plans) = load_plans(&graph, paths)?;
    prepare_out(&args.out)?;
    let d = plan_distance_matrix(&graph, &plans, &cfg)?;
    let ids: Vec<String> = plans.iter().map(|p| p.plan_id.clone()).collect();
    write_distance_matrix(&args.out.join("plan_distances.csv"), &ids, &d)?;
    let command = if cluster { "redistrict cluster" } else { "redistrict matrix" };
    if cluster {
        let merges = complete_linkage(&d)?;
        write_json(&args.out.join("dendrogram.json"), &dendrogram_json(&merges))?;
        write_table(
            &args.out.join("leaves.csv"),
            &["leaf", "plan_id"],
            ids.iter().enumerate().map(|(k, id)| vec![k.to_string(), id.clone()]),
        )?;
        println!("{} merges written to {}", merges.len(), path_text(&args.out.join("dendrogram.json")));
    } else {
        println!("{0}x{0} plan distance matrix written to {1}", ids.len(), path_text(&args.out.join("plan_distances.csv")));
    }
    write_manifest(command, &cfg, &inputs_with_graph(graph_args, &files), &args.out, None)?;
    Ok(())
}
