use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mgltree::algorithms::{
    decoupled_prepared, default_cap, mgl_tree_prepared, monotonicity_audit, node_risks,
    prepend_prepared, Prepared, TreePredictor,
};
use mgltree::data::{load_csv, make_synthetic, synth, write_csv, Dataset, SyntheticSpec};
use mgltree::eval::{compare, run_experiment_on, write_compare_csv, Method};
use mgltree::groups::{validate_hierarchical, GroupTree};
use mgltree::learners::{LearnerSpec, Predictor};
use mgltree::par::Exec;
use mgltree::risk::RiskValue;
use serde::Serialize;

use crate::config::Loaded;
use crate::Failure;

type Outcome = Result<u8, Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::usage(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::usage(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn validate_hierarchy(config: &Path, overrides: &[String]) -> Outcome {
    let cfg = Loaded::read(config, overrides)?;
    let ds = cfg.dataset().map_err(Failure::from_error)?;
    let groups = cfg
        .file
        .hierarchy
        .groups(ds.attributes())
        .map_err(Failure::from_error)?;
    let verdict = validate_hierarchical(&groups, Some(&ds));
    print!("{verdict}");
    if verdict.is_valid() {
        println!(" ({} groups)", groups.len());
        Ok(0)
    } else {
        Ok(1)
    }
}

#[derive(Serialize)]
struct GroupErmModel<'a> {
    learner: &'a LearnerSpec,
    groups: Vec<GroupErmEntry<'a>>,
}

#[derive(Serialize)]
struct GroupErmEntry<'a> {
    id: &'a str,
    n_g: usize,
    hypothesis: Option<&'a Arc<Predictor>>,
}

fn risk_cell(r: RiskValue) -> String {
    r.value.map(|v| format!("{v:.6}")).unwrap_or_default()
}

pub fn train(config: &Path, overrides: &[String], out: Option<&Path>) -> Outcome {
    let cfg = Loaded::read(config, overrides)?;
    let f = &cfg.file;
    let ds = cfg.dataset().map_err(Failure::from_error)?;
    let tree = f.hierarchy.build(ds.attributes()).map_err(Failure::from_error)?;
    let out = cfg.output_dir(out);
    create_dir(&out)?;

    let mut table = String::from("learner,group_id,depth,n_g,epsilon,group_erm");
    let trained: Vec<Method> = f.methods.iter().copied().filter(|m| *m != Method::GroupErm).collect();
    for m in &trained {
        table.push(',');
        table.push_str(m.name());
    }
    table.push('\n');

    for learner in &f.learners {
        let name = learner.name();
        let prepared = Prepared::new(&ds, &tree, learner, &f.epsilon, Exec::Parallel).map_err(Failure::from_error)?;
        let mut columns: Vec<Vec<RiskValue>> = Vec::new();
        for &method in &f.methods {
            let path = out.join(format!("{method}-{name}.json"));
            let risks = match method {
                Method::Erm => {
                    write_json(&path, prepared.erms.root())?;
                    node_risks(prepared.erms.root(), &ds, &prepared.members, &f.loss)
                }
                Method::GroupErm => {
                    let model = GroupErmModel {
                        learner,
                        groups: tree
                            .nodes()
                            .iter()
                            .enumerate()
                            .map(|(g, n)| GroupErmEntry {
                                id: &n.group.id,
                                n_g: prepared.members[g].len(),
                                hypothesis: prepared.erms.get(g),
                            })
                            .collect(),
                    };
                    write_json(&path, &model)?;
                    continue;
                }
                Method::MglTree => {
                    let model = mgl_tree_prepared(&ds, &tree, &prepared, &f.loss).map_err(Failure::from_error)?;
                    write_json(&path, &model)?;
                    let trace = out.join(format!("{method}-{name}.trace.jsonl"));
                    let mut buf = Vec::new();
                    model.write_trace(&mut buf).map_err(Failure::from_error)?;
                    fs::write(&trace, buf).map_err(|e| io_err(&trace, e))?;
                    node_risks(&model, &ds, &prepared.members, &f.loss)
                }
                Method::Prepend => {
                    let cap = f.prepend_cap.unwrap_or_else(|| default_cap(tree.len()));
                    let list = prepend_prepared(&ds, &tree, &prepared, &f.loss, cap).map_err(Failure::from_error)?;
                    write_json(&path, &list)?;
                    node_risks(&list, &ds, &prepared.members, &f.loss)
                }
                Method::Decoupled => {
                    let p = decoupled_prepared(&tree, &prepared, f.fallback).map_err(Failure::from_error)?;
                    write_json(&path, &p)?;
                    node_risks(&p, &ds, &prepared.members, &f.loss)
                }
            }
            .map_err(Failure::from_error)?;
            columns.push(risks);
        }
        let erm_risks = prepared.erm_risks(&ds, &f.loss);
        for (g, node) in tree.nodes().iter().enumerate() {
            let eps = prepared.epsilons[g];
            table.push_str(&format!(
                "{name},{},{},{},{},{}",
                node.group.id,
                node.depth,
                prepared.members[g].len(),
                if eps.is_finite() { format!("{eps:.6}") } else { eps.to_string() },
                risk_cell(erm_risks[g])
            ));
            for col in &columns {
                table.push(',');
                table.push_str(&risk_cell(col[g]));
            }
            table.push('\n');
        }
    }
    let path = out.join("training_risks.csv");
    fs::write(&path, &table).map_err(|e| io_err(&path, e))?;
    print!("{table}");
    Ok(0)
}

fn thread_pool(jobs: Option<usize>) -> Result<(Exec, Option<rayon_pool::Pool>), Failure> {
    match jobs {
        Some(0) => Err(Failure::usage("--jobs must be at least 1")),
        Some(1) => Ok((Exec::Sequential, None)),
        Some(n) => Ok((Exec::Parallel, rayon_pool::build(n)?)),
        None => Ok((Exec::Parallel, None)),
    }
}

#[cfg(feature = "parallel")]
mod rayon_pool {
    pub type Pool = rayon::ThreadPool;

    pub fn build(n: usize) -> Result<Option<Pool>, crate::Failure> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(Some)
            .map_err(|e| crate::Failure::usage(e.to_string()))
    }

    pub fn run<T: Send>(pool: Option<&Pool>, f: impl FnOnce() -> T + Send) -> T {
        match pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }
}

#[cfg(not(feature = "parallel"))]
mod rayon_pool {
    pub struct Pool;

    pub fn build(_: usize) -> Result<Option<Pool>, crate::Failure> {
        Ok(None)
    }

    pub fn run<T: Send>(_: Option<&Pool>, f: impl FnOnce() -> T + Send) -> T {
        f()
    }
}

pub fn evaluate(config: &Path, overrides: &[String], out: Option<&Path>, jobs: Option<usize>) -> Outcome {
    let cfg = Loaded::read(config, overrides)?;
    let exp = cfg.experiment();
    exp.validate().map_err(|e| Failure::usage(e.to_string()))?;
    // A missing or unreadable dataset is a failed experiment, not bad usage.
    let ds = cfg.dataset().map_err(|e| Failure::domain(e.to_string()))?;
    let (exec, pool) = thread_pool(jobs)?;
    let report = rayon_pool::run(pool.as_ref(), || run_experiment_on(&exp, &ds, exec)).map_err(Failure::from_error)?;

    let out = cfg.output_dir(out);
    create_dir(&out)?;
    report.write_csv(out.join("report.csv")).map_err(Failure::from_error)?;
    report.write_json(out.join("report.json")).map_err(Failure::from_error)?;
    if exp.methods.contains(&Method::MglTree) && exp.methods.contains(&Method::Erm) {
        let rows = compare(&report, Method::MglTree, Method::Erm).map_err(Failure::from_error)?;
        let path = out.join("compare_mgl_tree_erm.csv");
        let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        write_compare_csv(&rows, file).map_err(Failure::from_error)?;
    }

    println!("worst-group test error ({} trials)", exp.trials);
    for learner in report.learners() {
        for &m in &exp.methods {
            match report.worst_group(m, &learner) {
                Some(r) => println!(
                    "  {:<10} {:<14} {:.4} ± {:.4}  [{}]",
                    m.name(),
                    learner,
                    r.mean_error.unwrap_or(f64::NAN),
                    r.stderr.unwrap_or(0.0),
                    r.group_id
                ),
                None => println!("  {:<10} {:<14} -", m.name(), learner),
            }
        }
    }
    let missed: usize = report.trials.iter().filter_map(|t| t.mgl_guarantee_violations).sum();
    if exp.methods.contains(&Method::MglTree) {
        println!("mgl_tree training guarantee violations: {missed}");
    }
    println!("wrote {}", out.display());
    Ok(0)
}

pub fn audit(config: &Path, overrides: &[String], model: &Path, data: Option<&Path>) -> Outcome {
    let cfg = Loaded::read(config, overrides)?;
    let text = fs::read_to_string(model).map_err(|e| io_err(model, e))?;
    let predictor: TreePredictor = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("{}: not an MGL-Tree model: {e}", model.display())))?;
    let ds: Dataset = match data {
        Some(p) => load_csv(p, &cfg.file.schema),
        None => cfg.dataset(),
    }
    .map_err(|e| Failure::usage(e.to_string()))?;
    check_tree(&predictor.tree, &ds)?;
    let report = match monotonicity_audit(&predictor, &ds) {
        Ok(r) => r,
        Err(e @ mgltree::Error::Mismatch(_)) => return Err(Failure::usage(e.to_string())),
        Err(e) => return Err(Failure::from_error(e)),
    };
    println!("{report}");
    Ok(if report.is_clean() { 0 } else { 1 })
}

/// The model's groups must resolve against the data's attributes.
fn check_tree(tree: &GroupTree, ds: &Dataset) -> Result<(), Failure> {
    tree.compile(ds.attributes())
        .map(|_| ())
        .map_err(|e| Failure::usage(format!("model does not match the data: {e}")))
}

pub fn synth(spec: Option<&Path>, seed: u64, out: &Path, schema_out: Option<&Path>) -> Outcome {
    let spec: SyntheticSpec = match spec {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?
        }
        None => synth::random_spec(seed),
    };
    let ds = make_synthetic(&spec, seed).map_err(Failure::from_error)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_csv(&ds, out).map_err(Failure::from_error)?;
    let schema_path = schema_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(format!("{}.schema.json", out.with_extension("").display())));
    write_json(&schema_path, &spec.schema())?;
    println!(
        "wrote {} rows to {} (schema {})",
        ds.len(),
        out.display(),
        schema_path.display()
    );
    Ok(0)
}
