use std::path::{Path, PathBuf};
use std::process::ExitCode;

use gcn_ntk::analysis::{alignment_grid, depth_sweep, SweepOptions};
use gcn_ntk::dataset::{normalize_rows, read_features, read_graph, DatasetPaths};
use gcn_ntk::inference::{accuracy, partition_kernel, predict, write_predictions};
use gcn_ntk::matrix_io::{read_matrix, write_matrix, MatrixFormat};
use gcn_ntk::ntk::{compute_ntk, default_c_sigma};
use gcn_ntk::oracle::{train, FiniteWidthNet, TrainConfig};
use gcn_ntk::verify::{format_table, run_battery, BatteryConfig};
use gcn_ntk::{
    build_diffusion, load_dataset, ArchitectureSpec, Graph, Matrix, NodeDataset, Variant,
};

use serde::Serialize;

use crate::manifest::Manifest;
use crate::{
    AlignArgs, ArchArgs, Command, ComputeArgs, GraphArgs, LabelArgs, PredictArgs, SweepArgs,
    TrainArgs, VerifyArgs,
};

/// Failure classes of the exit-code contract.
enum Failure {
    /// Invalid flags or inputs detected before computing: exit 2.
    Config(String),
    /// Any error raised while running: exit 1.
    Runtime(String),
}

impl From<gcn_ntk::Error> for Failure {
    fn from(e: gcn_ntk::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

pub fn run(command: Command) -> ExitCode {
    let result = match command {
        Command::ComputeNtk(args) => compute_ntk_cmd(args),
        Command::Predict(args) => predict_cmd(args),
        Command::Sweep(args) => sweep_cmd(args),
        Command::Align(args) => align_cmd(args),
        Command::Verify(args) => verify_cmd(args),
        Command::Train(args) => train_cmd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

fn require_files<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Outcome {
    for p in paths {
        if !p.is_file() {
            return Err(config_err(format!("input file not found: {}", p.display())));
        }
    }
    Ok(())
}

fn prepare_out_dir(dir: &Path) -> Outcome {
    std::fs::create_dir_all(dir).map_err(|e| {
        config_err(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })
}

fn build_arch(args: &ArchArgs, depth: usize) -> Result<ArchitectureSpec, Failure> {
    if depth == 0 {
        return Err(config_err("depth must be at least 1"));
    }
    let skip_activation = args.skip_activation.unwrap_or(args.activation);
    if args.variant == Variant::Vanilla && args.skip_activation.is_some() {
        log::warn!("--skip-activation is ignored for the vanilla variant");
    }
    let alpha = match (args.variant, args.alpha) {
        (Variant::SkipAlpha, Some(a)) if a > 0.0 && a < 1.0 => a,
        (Variant::SkipAlpha, Some(a)) => {
            return Err(config_err(format!("--alpha must lie in (0, 1), got {a}")))
        }
        (Variant::SkipAlpha, None) => return Err(config_err("skip-alpha requires --alpha")),
        (_, Some(_)) => return Err(config_err("--alpha only applies to skip-alpha")),
        (_, None) => 0.0,
    };
    let c_sigma = match args.c_sigma {
        Some(c) if c.is_finite() && c > 0.0 => c,
        Some(c) => return Err(config_err(format!("--c-sigma must be positive, got {c}"))),
        None => default_c_sigma(args.variant, args.activation),
    };
    let arch = ArchitectureSpec {
        variant: args.variant,
        activation: args.activation,
        skip_activation,
        depth,
        c_sigma,
        alpha,
        output_head: args.output_head,
    };
    arch.validate().map_err(|e| config_err(e.to_string()))?;
    Ok(arch)
}

fn check_depths(depths: &[usize]) -> Outcome {
    if depths.is_empty() {
        return Err(config_err("--depths is empty"));
    }
    if depths.contains(&0) {
        return Err(config_err("depths must be positive"));
    }
    if depths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config_err("--depths must be strictly increasing"));
    }
    Ok(())
}

fn dataset_paths(graph: &GraphArgs, labels: &LabelArgs) -> DatasetPaths {
    DatasetPaths {
        graph: graph.graph.clone(),
        features: graph.features.clone(),
        labels: labels.labels.clone(),
        grouping: labels.grouping.clone(),
        split: labels.split.clone(),
    }
}

fn load_graph_features(args: &GraphArgs) -> Result<(Graph, Matrix), Failure> {
    let graph = read_graph(&args.graph)?;
    let mut x = read_features(&args.features)?;
    if x.nrows() != graph.n() {
        return Err(Failure::Runtime(format!(
            "{} has {} rows but the graph has {} nodes",
            args.features.display(),
            x.nrows(),
            graph.n()
        )));
    }
    if args.normalize_features {
        normalize_rows(&mut x);
    }
    Ok((graph, x))
}

fn load_labeled(graph: &GraphArgs, labels: &LabelArgs) -> Result<(Graph, NodeDataset), Failure> {
    Ok(load_dataset(
        &dataset_paths(graph, labels),
        graph.normalize_features,
    )?)
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Runs `body` and writes the manifest whatever the outcome.
fn with_manifest<C: Serialize>(
    command: &'static str,
    config: &C,
    out_dir: &Path,
    body: impl FnOnce(&mut Manifest) -> Outcome,
) -> Outcome {
    prepare_out_dir(out_dir)?;
    let mut manifest = Manifest::new(command, config);
    let result = body(&mut manifest);
    let message = match &result {
        Ok(()) => None,
        Err(Failure::Config(m) | Failure::Runtime(m)) => Some(m.clone()),
    };
    if let Err(e) = manifest.write(out_dir, message.as_deref()) {
        eprintln!("warning: cannot write manifest: {e}");
    }
    result
}

fn compute_ntk_cmd(args: ComputeArgs) -> Outcome {
    with_manifest("compute-ntk", &args, &args.out.out_dir, |m| {
        require_files([args.graph.graph.as_path(), args.graph.features.as_path()])?;
        let arch = build_arch(&args.arch, args.depth)?;
        m.set("architecture", arch);
        m.set("ntk_form", args.arch.ntk_form);
        let (graph, x) = load_graph_features(&args.graph)?;
        m.set("nodes", graph.n());
        m.set("edges", graph.edges().len());
        let s = build_diffusion(&graph);
        m.mark("load");
        let stack = compute_ntk(&s, &x, &arch, args.arch.ntk_form)?;
        m.mark("kernel");
        m.set("invariants", stack.check_invariants());
        m.mark("invariant_check");
        let (name, format) = if args.text {
            ("kernel.txt", MatrixFormat::Text)
        } else {
            ("kernel.bin", MatrixFormat::Binary)
        };
        let path = args.out.out_dir.join(name);
        write_matrix(&path, stack.theta()?, format)?;
        m.output(&path);
        m.mark("write");
        Ok(())
    })
}

fn predict_cmd(args: PredictArgs) -> Outcome {
    with_manifest("predict", &args, &args.out.out_dir, |m| {
        let paths = dataset_paths(&args.graph, &args.labels);
        require_files(paths.iter().chain([args.kernel.as_path()]))?;
        if let Some(r) = args.ridge {
            if !(r.is_finite() && r >= 0.0) {
                return Err(config_err(format!("--ridge must be non-negative, got {r}")));
            }
        }
        let (_, data) = load_labeled(&args.graph, &args.labels)?;
        let theta = read_matrix(&args.kernel, MatrixFormat::from_path(&args.kernel))?;
        if theta.nrows() != data.n() || theta.ncols() != data.n() {
            return Err(config_err(format!(
                "kernel is {}x{} but the dataset has {} nodes",
                theta.nrows(),
                theta.ncols(),
                data.n()
            )));
        }
        m.mark("load");
        let mut part = partition_kernel(&theta, data.train_ids(), data.test_ids())?;
        m.set("ridge_requested", args.ridge);
        if let Some(r) = args.ridge {
            part = part.with_ridge(r)?;
        }
        let pred = predict(&part, &data.y_obs())?;
        m.mark("solve");
        m.set("ridge_used", pred.ridge);
        m.set("ridge_retries", pred.retries);
        m.set("solve_residual", pred.residual);
        m.set("cond_est", pred.cond_est);
        if !data.test_ids().is_empty() {
            let acc = accuracy(&pred.labels, &data.y_test())?;
            m.set("accuracy", acc);
            println!("accuracy {acc}");
        }
        let path = args.out.out_dir.join("predictions.txt");
        write_predictions(&path, data.test_ids(), &pred)?;
        m.output(&path);
        Ok(())
    })
}

fn sweep_cmd(args: SweepArgs) -> Outcome {
    with_manifest("sweep", &args, &args.out.out_dir, |m| {
        let paths = dataset_paths(&args.graph, &args.labels);
        require_files(paths.iter())?;
        check_depths(&args.depths)?;
        let first = *args.depths.first().expect("depths checked non-empty");
        let arch = build_arch(&args.arch, first)?;
        if let Some(r) = args.ridge {
            if !(r.is_finite() && r >= 0.0) {
                return Err(config_err(format!("--ridge must be non-negative, got {r}")));
            }
        }
        m.set("architecture", arch);
        let (graph, data) = load_labeled(&args.graph, &args.labels)?;
        let s = build_diffusion(&graph);
        m.mark("load");
        let options = SweepOptions {
            ridge: args.ridge,
            form: args.arch.ntk_form,
            timings: args.timings,
        };
        let sweep = depth_sweep(&s, &data, &arch, &args.depths, options)?;
        m.mark("sweep");
        let path = args.out.out_dir.join("sweep.csv");
        write_text(&path, &sweep.to_csv())?;
        m.output(&path);
        m.set("rows", &sweep.rows);
        Ok(())
    })
}

fn align_cmd(args: AlignArgs) -> Outcome {
    with_manifest("align", &args, &args.out.out_dir, |m| {
        require_files([args.graph.graph.as_path(), args.graph.features.as_path()])?;
        check_depths(&args.depths)?;
        if args.k == 0 {
            return Err(config_err("--k must be at least 1"));
        }
        let arch = build_arch(&args.arch, args.depths[0])?;
        m.set("architecture", arch);
        let (graph, x) = load_graph_features(&args.graph)?;
        if args.k > graph.n() {
            return Err(config_err(format!(
                "--k {} exceeds the node count {}",
                args.k,
                graph.n()
            )));
        }
        let s = build_diffusion(&graph);
        m.mark("load");
        let grid = alignment_grid(&s, &x, &arch, &args.depths, args.k, args.arch.ntk_form)?;
        m.mark("align");
        let path = args.out.out_dir.join("alignment.csv");
        write_text(&path, &grid.to_csv())?;
        m.output(&path);
        m.set("near_ties", &grid.near_ties);
        Ok(())
    })
}

fn verify_cmd(args: VerifyArgs) -> Outcome {
    with_manifest("verify", &args, &args.out.out_dir, |m| {
        if args.width == 0 || args.samples == 0 {
            return Err(config_err("--width and --samples must be positive"));
        }
        if let Some(dir) = &args.cora_dir {
            require_files(DatasetPaths::in_dir(dir).iter())?;
        }
        let config = BatteryConfig {
            width: args.width,
            samples: args.samples,
            form: args.ntk_form,
            ..BatteryConfig::new(args.seed)
        };
        let outcomes = run_battery(&config, args.cora_dir.as_deref());
        print!("{}", format_table(&outcomes));
        m.set("checks", &outcomes);
        let failed: Vec<&str> = outcomes
            .iter()
            .filter(|o| !o.passed)
            .map(|o| o.id)
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Failure::Runtime(format!(
                "failed checks: {}",
                failed.join(", ")
            )))
        }
    })
}

fn train_cmd(args: TrainArgs) -> Outcome {
    with_manifest("train", &args, &args.out.out_dir, |m| {
        let paths = dataset_paths(&args.graph, &args.labels);
        require_files(paths.iter())?;
        let arch = build_arch(&args.arch, args.depth)?;
        if args.width == 0 {
            return Err(config_err("--width must be positive"));
        }
        if !(args.lr.is_finite() && args.lr >= 0.0) {
            return Err(config_err(format!(
                "--lr must be non-negative, got {}",
                args.lr
            )));
        }
        m.set("architecture", arch);
        let (graph, data) = load_labeled(&args.graph, &args.labels)?;
        let s = build_diffusion(&graph);
        let net = FiniteWidthNet::sample(arch, data.features().ncols(), args.width, args.seed)?;
        m.mark("setup");
        let config = TrainConfig {
            learning_rate: args.lr,
            epochs: args.epochs,
        };
        let (_, report) = train(net, &s, &data, config)?;
        m.mark("train");
        let path: PathBuf = args.out.out_dir.join("training.csv");
        write_text(&path, &report.to_csv())?;
        m.output(&path);
        m.set("final_loss", report.loss.last());
        m.set("final_test_accuracy", report.test_accuracy.last());
        Ok(())
    })
}
