use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};

use crossmap_core::extraction::ExtractionResult;
use crossmap_core::graph::{type_counts, Component};
use crossmap_core::io::{
    edge_list_to_string, export_dot, import_crosswalk, read_array, read_crosswalk, read_edge_list,
    read_key_list, write_array, write_matrix, SplitPolicy, TextTable, WeightFormat,
};
use crossmap_core::transform::apply_batch;
use crossmap_core::{
    build_crossmap, components, compose_all, imputation_metrics, parse_rational, probe_blackbox,
    reverse, summarize, to_matrix, Crossmap, ExternalCommand, Key, OnUncovered, ProbeOptions,
    RelationType, Severity, SharedMassArray, TransformOptions, TransformReceipt,
};

use crate::context::Context;
use crate::failure::{ExitStatus, Failure};
use crate::{
    ApplyArgs, Cli, Command, ComposeArgs, ExtractArgs, ImportArgs, MapArgs, MapOutArgs,
    SummarizeArgs, ValidateArgs, Weights,
};

/// Keys shown per cell before the list is cut short.
const KEY_LIST_LIMIT: usize = 10;

pub fn run(cli: &Cli, ctx: &mut Context) -> Result<(), Failure> {
    let weights = match cli.weights {
        Weights::Fraction => WeightFormat::Fraction,
        Weights::Decimal => WeightFormat::Decimal,
    };
    match &cli.command {
        Command::Validate(args) => validate(args, cli.json, ctx),
        Command::Apply(args) => apply(args, cli.json, ctx),
        Command::Compose(args) => compose(args, weights, ctx),
        Command::Reverse(args) => reverse_map(args, weights, ctx),
        Command::Classify(args) => classify(args, cli.json, ctx),
        Command::Summarize(args) => summary(args, cli.json, ctx),
        Command::Extract(args) => extract(args, cli.json, weights, ctx),
        Command::ImportCrosswalk(args) => crosswalk(args, cli.json, weights, ctx),
        Command::ExportDot(args) => dot(args, ctx),
        Command::ExportMatrix(args) => matrix(args, ctx),
    }
}

fn load_map(path: &str, ctx: &mut Context) -> Result<Crossmap, Failure> {
    let bytes = ctx.load(path)?;
    let draft = read_edge_list(bytes.as_slice()).map_err(|e| Failure::format(path, e))?;
    build_crossmap(&draft).map_err(|report| Failure::invalid_map(path, report))
}

fn load_array(path: &str, ctx: &mut Context) -> Result<SharedMassArray, Failure> {
    let bytes = ctx.load(path)?;
    read_array(bytes.as_slice()).map_err(|e| Failure::format(path, e))
}

fn array_bytes(array: &SharedMassArray) -> Vec<u8> {
    let mut buf = Vec::new();
    write_array(array, &mut buf).expect("writing to memory");
    buf
}

fn to_json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serialisable") + "\n"
}

fn key_list<'a>(keys: impl IntoIterator<Item = &'a Key>) -> String {
    let keys: Vec<&str> = keys.into_iter().map(Key::as_str).collect();
    if keys.len() > KEY_LIST_LIMIT {
        format!("{},...", keys[..KEY_LIST_LIMIT].join(","))
    } else {
        keys.join(",")
    }
}

fn validate(args: &ValidateArgs, json: bool, ctx: &mut Context) -> Result<(), Failure> {
    let map = load_map(&args.edges, ctx)?;
    ctx.result = json!({ "ok": true });
    let out = if json {
        to_json(&json!({
            "ok": true,
            "edges": map.edges().len(),
            "sources": map.sources().len(),
            "targets": map.targets().len(),
        }))
    } else {
        format!(
            "valid: {} edges, {} sources, {} targets\n",
            map.edges().len(),
            map.sources().len(),
            map.targets().len()
        )
    };
    ctx.emit(None, out.as_bytes())
}

fn receipt_text(label: Option<&str>, r: &TransformReceipt) -> String {
    let prefix = label.map(|l| format!("{l}: ")).unwrap_or_default();
    let mut text = format!(
        "{prefix}input_total={} output_total={} dropped_mass={} split_mass={}",
        r.input_total, r.output_total, r.dropped_mass, r.split_mass
    );
    if !r.dropped_keys.is_empty() {
        text.push_str(&format!(" dropped_keys={}", key_list(&r.dropped_keys)));
    }
    text
}

fn apply(args: &ApplyArgs, json: bool, ctx: &mut Context) -> Result<(), Failure> {
    if args.data.len() > 1 && args.out_dir.is_none() {
        return Err(Failure::usage("several --data files need --out-dir"));
    }
    let map = load_map(&args.map, ctx)?;
    let arrays = args
        .data
        .iter()
        .map(|p| load_array(p, ctx))
        .collect::<Result<Vec<_>, _>>()?;
    let opts = TransformOptions {
        emit_zero_targets: !args.drop_zeros,
        on_uncovered: if args.drop_uncovered {
            OnUncovered::DropAndReport
        } else {
            OnUncovered::Error
        },
    };
    let mut outputs = Vec::with_capacity(arrays.len());
    for (path, result) in args.data.iter().zip(apply_batch(&map, &arrays, &opts)) {
        let (array, receipt) = result.map_err(|e| {
            let mut failure = Failure::transform(e);
            failure.message = format!("{path}: {}", failure.message);
            failure.details["file"] = json!(path);
            failure
        })?;
        if !receipt.is_balanced() {
            return Err(Failure::new(
                ExitStatus::Invalid,
                format!("{path}: receipt does not balance"),
                json!({ "file": path, "receipt": receipt }),
            ));
        }
        outputs.push((path, array, receipt));
    }

    let receipts: Vec<Value> = outputs
        .iter()
        .map(|(path, _, r)| json!({ "file": path, "receipt": r }))
        .collect();
    ctx.result = json!({ "receipts": receipts });
    if json {
        eprint!("{}", to_json(&ctx.result));
    } else {
        for (path, _, r) in &outputs {
            let label = (outputs.len() > 1).then_some(path.as_str());
            eprintln!("{}", receipt_text(label, r));
        }
    }

    match &args.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Failure::io(&dir.display().to_string(), e))?;
            for (path, array, _) in &outputs {
                let name = if path.as_str() == "-" {
                    "stdin.csv".into()
                } else {
                    Path::new(path.as_str())
                        .file_name()
                        .map(|n| n.to_os_string())
                        .ok_or_else(|| Failure::usage(format!("{path}: no file name")))?
                };
                let target = dir.join(name);
                ctx.emit(Some(&target.display().to_string()), &array_bytes(array))?;
            }
            Ok(())
        }
        None => ctx.emit(args.out.as_deref(), &array_bytes(&outputs[0].1)),
    }
}

fn compose(args: &ComposeArgs, weights: WeightFormat, ctx: &mut Context) -> Result<(), Failure> {
    let maps = args
        .maps
        .iter()
        .map(|p| load_map(p, ctx))
        .collect::<Result<Vec<_>, _>>()?;
    let composed = compose_all(&maps).map_err(|(step, e)| Failure::algebra(step, e))?;
    ctx.result = json!({ "edges": composed.edges().len() });
    ctx.emit(
        args.out.as_deref(),
        edge_list_to_string(&composed, weights).as_bytes(),
    )
}

fn reverse_map(args: &MapOutArgs, weights: WeightFormat, ctx: &mut Context) -> Result<(), Failure> {
    let map = load_map(&args.edges, ctx)?;
    let reversed = reverse(&map).map_err(|report| {
        let summary = report
            .errors()
            .map(|f| f.message.clone())
            .collect::<Vec<_>>()
            .join("; ");
        Failure::new(
            ExitStatus::Invalid,
            format!("{}: cannot be reversed: {summary}", args.edges),
            json!({ "file": args.edges, "report": report }),
        )
    })?;
    ctx.emit(
        args.out.as_deref(),
        edge_list_to_string(&reversed, weights).as_bytes(),
    )
}

fn component_json(index: usize, c: &Component) -> Value {
    json!({
        "component": index + 1,
        "relation_type": c.relation_type,
        "sources": c.sources,
        "targets": c.targets,
        "edges": c.edges,
    })
}

fn type_count_line(counts: &BTreeMap<RelationType, usize>) -> String {
    RelationType::ALL
        .iter()
        .map(|t| format!("{t}={}", counts.get(t).copied().unwrap_or(0)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn classify(args: &MapArgs, json: bool, ctx: &mut Context) -> Result<(), Failure> {
    let map = load_map(&args.edges, ctx)?;
    let comps = components(&map);
    let counts = type_counts(&comps);
    ctx.result = json!({ "component_type_counts": counts });
    let out = if json {
        let list: Vec<Value> = comps
            .iter()
            .enumerate()
            .map(|(i, c)| component_json(i, c))
            .collect();
        to_json(&json!({ "components": list, "component_type_counts": counts }))
    } else {
        let mut table = TextTable::new(["component", "type", "sources", "targets"]).align_right(0);
        for (i, c) in comps.iter().enumerate() {
            table.push_row([
                (i + 1).to_string(),
                c.relation_type.to_string(),
                key_list(&c.sources),
                key_list(&c.targets),
            ]);
        }
        format!("{}\n{}\n", table.render(), type_count_line(&counts))
    };
    ctx.emit(None, out.as_bytes())
}

fn summary(args: &SummarizeArgs, json: bool, ctx: &mut Context) -> Result<(), Failure> {
    let map = load_map(&args.edges, ctx)?;
    let array = args
        .data
        .as_deref()
        .map(|p| load_array(p, ctx))
        .transpose()?;
    let summary = summarize(&map);
    let metrics = imputation_metrics(&map, array.as_ref()).map_err(Failure::transform)?;
    ctx.result = json!({ "metrics": metrics });
    let out = if json {
        to_json(&json!({ "summary": summary, "metrics": metrics }))
    } else {
        let mut table = TextTable::new(["target", "incoming", "sources"]).align_right(1);
        for t in &summary.targets {
            table.push_row([
                t.target.to_string(),
                t.incoming_count.to_string(),
                key_list(&t.incoming_sources),
            ]);
        }
        let mut text = table.render();
        text.push('\n');
        text.push_str(&format!(
            "edges {}, sources {}, targets {}, components {}\n",
            summary.edge_count, summary.source_count, summary.target_count, summary.component_count
        ));
        text.push_str(&format!(
            "component types: {}\n",
            type_count_line(&summary.component_type_counts)
        ));
        text.push_str(&format!(
            "fractional edges {}, split sources {}, potential split share {}\n",
            metrics.fractional_edge_count,
            metrics.split_source_count,
            metrics.potential_split_share
        ));
        if let Some(share) = &metrics.realized_split_mass_share {
            text.push_str(&format!("realized split mass share {share}\n"));
        }
        text
    };
    ctx.emit(None, out.as_bytes())
}

fn extraction_details(result: &ExtractionResult) -> Value {
    json!({
        "nonconforming_sources": result.nonconforming_sources,
        "inexact_sources": result.inexact_sources,
        "raw_weights": result.raw_weights,
        "tolerance_used": result.tolerance_used,
        "rationalized": result.rationalized,
    })
}

fn extract(
    args: &ExtractArgs,
    json: bool,
    weights: WeightFormat,
    ctx: &mut Context,
) -> Result<(), Failure> {
    let mut words = shlex::split(&args.cmd)
        .filter(|w| !w.is_empty())
        .ok_or_else(|| Failure::usage(format!("cannot parse --cmd {:?}", args.cmd)))?;
    if words.is_empty() {
        return Err(Failure::usage("--cmd is empty"));
    }
    let program = words.remove(0);
    let tolerance = parse_rational(&args.tolerance)
        .ok()
        .filter(|t| !t.is_negative())
        .ok_or_else(|| Failure::usage(format!("invalid --tolerance {:?}", args.tolerance)))?;
    let key_bytes = ctx.load(&args.keys)?;
    let keys = read_key_list(key_bytes.as_slice()).map_err(|e| Failure::format(&args.keys, e))?;
    let defaults = ProbeOptions::default();
    let opts = ProbeOptions {
        tolerance,
        rationalize_max_denominator: args.rationalize_max_den,
        jobs: args.jobs.unwrap_or(defaults.jobs).max(1),
        determinism_sample: args.determinism_sample,
    };
    let blackbox = ExternalCommand::new(program, words);
    let result = probe_blackbox(&blackbox, &keys, &opts).map_err(Failure::probe)?;
    ctx.result = json!({
        "probes_sent": result.probes_sent,
        "nonconforming_sources": result.nonconforming_sources,
        "inexact_sources": result.inexact_sources,
    });
    let Some(map) = &result.crossmap else {
        let bad = result.nonconforming_sources.len() + result.inexact_sources.len();
        return Err(Failure::new(
            ExitStatus::Invalid,
            format!("{bad} source(s) do not sum to exactly 1; no crossmap written"),
            extraction_details(&result),
        ));
    };
    if json {
        eprint!(
            "{}",
            to_json(&json!({
                "probes_sent": result.probes_sent,
                "sources": map.sources().len(),
                "edges": map.edges().len(),
                "tolerance_used": result.tolerance_used,
                "rationalized": result.rationalized,
            }))
        );
    } else {
        eprintln!(
            "probed {} sources with {} probes: {} edges to {} targets",
            map.sources().len(),
            result.probes_sent,
            map.edges().len(),
            map.targets().len()
        );
    }
    ctx.emit(
        args.out.as_deref(),
        edge_list_to_string(map, weights).as_bytes(),
    )
}

fn crosswalk(
    args: &ImportArgs,
    json: bool,
    weights: WeightFormat,
    ctx: &mut Context,
) -> Result<(), Failure> {
    let bytes = ctx.load(&args.crosswalk)?;
    let cw = read_crosswalk(bytes.as_slice()).map_err(|e| Failure::format(&args.crosswalk, e))?;
    let policy = if args.equal_split {
        SplitPolicy::EqualSplit
    } else {
        SplitPolicy::RejectSplits
    };
    let imported = import_crosswalk(&cw, policy).map_err(|report| {
        let mut failure = Failure::invalid_map(&args.crosswalk, report);
        failure.message = format!(
            "{}: split sources need weights (use --equal-split to impute)",
            args.crosswalk
        );
        failure
    })?;
    let warnings: Vec<_> = imported
        .report
        .findings
        .iter()
        .filter(|f| f.severity == Severity::Warning)
        .collect();
    ctx.result = json!({ "warnings": warnings });
    if json && !warnings.is_empty() {
        eprint!("{}", to_json(&json!({ "warnings": warnings })));
    } else {
        for w in &warnings {
            eprintln!("warning: {}", w.message);
        }
    }
    ctx.emit(
        args.out.as_deref(),
        edge_list_to_string(&imported.crossmap, weights).as_bytes(),
    )
}

fn dot(args: &MapOutArgs, ctx: &mut Context) -> Result<(), Failure> {
    let map = load_map(&args.edges, ctx)?;
    ctx.emit(args.out.as_deref(), export_dot(&map).as_bytes())
}

fn matrix(args: &MapOutArgs, ctx: &mut Context) -> Result<(), Failure> {
    let map = load_map(&args.edges, ctx)?;
    let mut buf = Vec::new();
    write_matrix(&to_matrix(&map), &mut buf).map_err(|e| Failure::format("<matrix>", e))?;
    ctx.emit(args.out.as_deref(), &buf)
}
