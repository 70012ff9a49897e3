use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use reclink::data::{load_table_inferred, write_table, BlockIndex, DataFile};
use reclink::formula::{build_chain, parse_formula, Family};
use reclink::harness::{
    count_correct, random_baseline, split_complete, synthesize, DropSide, GenerativeModel, SplitOptions, TruthMap,
};
use reclink::linkage::{apply_permutation, fit_analysis};
use reclink::rng::{stream, StreamKind};
use reclink::mi::{combine as mi_combine, DfMethod, MiInput, MiResult};
use reclink::sampler::{run, PermutationSet, SamplerConfig};

use crate::{ApplyArgs, CombineArgs, EvaluateArgs, InputArgs, SampleArgs, SimulateArgs};

#[derive(Clone, Copy, Debug)]
pub enum FailureKind {
    Config = 1,
    Data = 2,
    Sampling = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: FailureKind,
    pub error: anyhow::Error,
}

type Outcome = Result<(), Failure>;

trait Classify<T> {
    fn or_fail(self, kind: FailureKind) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn or_fail(self, kind: FailureKind) -> Result<T, Failure> {
        self.map_err(|e| Failure { kind, error: e.into() })
    }
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure {
        kind: FailureKind::Config,
        error: anyhow!(msg.into()),
    }
}

const SAMPLE_USAGE: &str =
    "usage: reclink sample --a FILE --b FILE --model FORMULA:FAMILY [--model ...] [--m M] [--iters I] [--t T] \
     [--burnin N] [--interval K] [--seed S] [--threads N] --out DIR";

/// Sampler settings readable from a JSON config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleFile {
    a: Option<String>,
    b: Option<String>,
    block: Option<String>,
    #[serde(default)]
    models: Vec<String>,
    m: Option<usize>,
    iters: Option<usize>,
    t: Option<usize>,
    burnin: Option<usize>,
    interval: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
    out: Option<String>,
}

struct Inputs {
    a: DataFile,
    b: DataFile,
}

fn load_inputs(input: &InputArgs) -> Result<Inputs, Failure> {
    let a = input.a.as_deref().ok_or_else(|| config_error("--a is required"))?;
    let b = input.b.as_deref().ok_or_else(|| config_error("--b is required"))?;
    let block = input.block.as_deref().unwrap_or("block");
    Ok(Inputs {
        a: load_table_inferred(a, block).or_fail(FailureKind::Data)?.with_name("A"),
        b: load_table_inferred(b, block).or_fail(FailureKind::Data)?.with_name("B"),
    })
}

/// Splits "formula:family" at the last colon.
fn parse_model(text: &str) -> Result<(String, Family), Failure> {
    let (formula, family) = text
        .rsplit_once(':')
        .ok_or_else(|| config_error(format!("model {text:?} must have the form formula:family")))?;
    let family = family
        .trim()
        .parse::<Family>()
        .map_err(|e| config_error(format!("model {text:?}: {e}")))?;
    Ok((formula.trim().to_string(), family))
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        println!("seed: {s} (drawn from system entropy)");
        s
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).or_fail(FailureKind::Data)?;
    fs::write(path, text + "\n")
        .with_context(|| format!("cannot write {}", path.display()))
        .or_fail(FailureKind::Data)
}

#[derive(Serialize)]
struct SampleSummary {
    seed: u64,
    samples: usize,
    blocks: usize,
    linkable_blocks: usize,
    degenerate_blocks: usize,
    iterations: usize,
    mean_iteration_secs: f64,
    swap_acceptance: f64,
    models: Vec<ModelSummary>,
    singular_skips: usize,
}

#[derive(Serialize)]
struct ModelSummary {
    formula: String,
    family: String,
    acceptance: Option<f64>,
    beta: Vec<f64>,
    sigma2: Option<f64>,
}

pub fn sample(args: SampleArgs) -> Outcome {
    let file: SampleFile = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {path}"))
                .or_fail(FailureKind::Config)?;
            serde_json::from_str(&text)
                .with_context(|| format!("invalid config {path}"))
                .or_fail(FailureKind::Config)?
        }
        None => SampleFile::default(),
    };
    let input = InputArgs {
        a: args.input.a.or(file.a),
        b: args.input.b.or(file.b),
        block: args.input.block.or(file.block),
    };
    let models = if args.models.is_empty() { file.models } else { args.models };
    if models.is_empty() {
        return Err(config_error(format!("at least one --model is required\n{SAMPLE_USAGE}")));
    }
    let out = args
        .out
        .or(file.out)
        .ok_or_else(|| config_error(format!("--out is required\n{SAMPLE_USAGE}")))?;
    let defaults = SamplerConfig::default();
    let config = SamplerConfig {
        samples: args.m.or(file.m).unwrap_or(defaults.samples),
        theta_iterations: args.iters.or(file.iters).unwrap_or(defaults.theta_iterations),
        mh_multiplier: args.t.or(file.t).unwrap_or(defaults.mh_multiplier),
        burnin: args.burnin.or(file.burnin).unwrap_or(defaults.burnin),
        interval: args.interval.or(file.interval).unwrap_or(defaults.interval),
        seed: resolve_seed(args.seed.or(file.seed)),
        threads: args.threads.or(file.threads).unwrap_or(defaults.threads),
        target_acceptance: defaults.target_acceptance,
    };
    config.validate().or_fail(FailureKind::Config)?;
    let parsed = models.iter().map(|m| parse_model(m)).collect::<Result<Vec<_>, _>>()?;
    let (formulas, families): (Vec<String>, Vec<Family>) = parsed.into_iter().unzip();

    let Inputs { a, b } = load_inputs(&input)?;
    let chain = build_chain(&formulas, &families, &a, &b).or_fail(FailureKind::Config)?;
    let out_dir = PathBuf::from(out);
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))
        .or_fail(FailureKind::Data)?;

    let output = run(&a, &b, &chain, &config).or_fail(FailureKind::Sampling)?;
    output
        .permutations
        .write_csv(out_dir.join("P.csv"))
        .or_fail(FailureKind::Data)?;
    output
        .permutations
        .write_imputations(out_dir.join("imputes.csv"))
        .or_fail(FailureKind::Data)?;

    let s = &output.summary;
    let summary = SampleSummary {
        seed: config.seed,
        samples: output.permutations.len(),
        blocks: s.blocks,
        linkable_blocks: s.linkable_blocks,
        degenerate_blocks: s.degenerate_blocks,
        iterations: s.iterations,
        mean_iteration_secs: s.mean_iteration_secs,
        swap_acceptance: s.swap_acceptance,
        models: chain
            .specs()
            .iter()
            .zip(&formulas)
            .zip(&output.theta.models)
            .zip(&s.model_acceptance)
            .map(|(((spec, f), params), acc)| ModelSummary {
                formula: f.clone(),
                family: spec.family.to_string(),
                acceptance: *acc,
                beta: params.beta.clone(),
                sigma2: params.sigma2,
            })
            .collect(),
        singular_skips: s.singular_skips,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;

    println!("seed: {}", config.seed);
    println!(
        "blocks: {} ({} linkable, {} degenerate)",
        s.blocks, s.linkable_blocks, s.degenerate_blocks
    );
    println!(
        "iterations: {} (mean {:.3} ms per iteration)",
        s.iterations,
        1e3 * s.mean_iteration_secs
    );
    for m in &summary.models {
        match m.acceptance {
            Some(rate) => println!("model {} [{}]: random-walk acceptance {:.3}", m.formula, m.family, rate),
            None => println!("model {} [{}]: exact Gibbs kernel", m.formula, m.family),
        }
    }
    println!("swap acceptance: {:.3}", s.swap_acceptance);
    if s.singular_skips > 0 {
        println!("rank-deficient updates skipped: {}", s.singular_skips);
    }
    println!("wrote {} samples to {}", output.permutations.len(), out_dir.display());
    Ok(())
}

fn column_of(set: &PermutationSet, column: usize) -> Result<&[Option<usize>], Failure> {
    set.columns.get(column).map(Vec::as_slice).ok_or_else(|| {
        config_error(format!(
            "sample column {column} out of range; the file has {} samples",
            set.len()
        ))
    })
}

pub fn apply(args: ApplyArgs) -> Outcome {
    let Inputs { a, b } = load_inputs(&args.input)?;
    let set = PermutationSet::read_csv(&args.perm).or_fail(FailureKind::Data)?;
    let column = column_of(&set, args.column)?;
    let linked = apply_permutation(&a, &b, column).or_fail(FailureKind::Data)?;
    write_table(&linked, &args.out).or_fail(FailureKind::Data)?;
    println!("wrote {} linked rows to {}", linked.len(), args.out);
    Ok(())
}

#[derive(Serialize)]
struct Coefficient {
    name: String,
    estimates: Vec<f64>,
    std_errors: Vec<f64>,
    #[serde(flatten)]
    result: MiResult,
}

#[derive(Serialize)]
struct CombineReport {
    formula: String,
    family: String,
    coefficients: Vec<Coefficient>,
}

fn print_result(name: &str, r: &MiResult) {
    let df = r.df.map_or("inf".to_string(), |d| format!("{d:.2}"));
    println!(
        "{name}: estimate {:.6} total variance {:.6} df {df} {}% interval [{:.6}, {:.6}]{}",
        r.estimate,
        r.total,
        100.0 * r.level,
        r.lower,
        r.upper,
        if r.df_fallback { " (df fallback)" } else { "" }
    );
}

pub fn combine(args: CombineArgs) -> Outcome {
    let method: DfMethod = args.df.parse().or_fail(FailureKind::Config)?;
    if !args.estimates.is_empty() || !args.std_errors.is_empty() {
        let input = MiInput {
            estimates: args.estimates,
            std_errors: args.std_errors,
            level: args.level,
            df_method: method,
            vcom: args.vcom,
        };
        let result = mi_combine(&input).or_fail(FailureKind::Config)?;
        print_result("estimate", &result);
        if let Some(out) = &args.out {
            write_json(Path::new(out), &result)?;
        }
        println!("{}", serde_json::to_string(&result).or_fail(FailureKind::Data)?);
        return Ok(());
    }

    let formula_text = args
        .formula
        .as_deref()
        .ok_or_else(|| config_error("--formula is required unless --estimates is given"))?;
    let formula = parse_formula(formula_text).or_fail(FailureKind::Config)?;
    let family: Family = args.family.parse().or_fail(FailureKind::Config)?;
    let perm = args
        .perm
        .as_deref()
        .ok_or_else(|| config_error("--perm is required unless --estimates is given"))?;
    let set = PermutationSet::read_csv(perm).or_fail(FailureKind::Data)?;
    if set.len() < 2 {
        return Err(config_error(format!(
            "combining needs at least 2 samples, {perm} has {}",
            set.len()
        )));
    }
    let Inputs { a, b } = load_inputs(&args.input)?;

    let mut fits = Vec::with_capacity(set.len());
    for column in &set.columns {
        let linked = apply_permutation(&a, &b, column).or_fail(FailureKind::Data)?;
        fits.push(fit_analysis(&formula, family, &linked).or_fail(FailureKind::Data)?);
    }
    let names = fits[0].names.clone();
    let vcom = args
        .vcom
        .or_else(|| Some(a.len() as f64 - names.len() as f64))
        .filter(|_| method != DfMethod::Normal);
    let mut coefficients = Vec::with_capacity(names.len());
    for (k, name) in names.iter().enumerate() {
        let estimates: Vec<f64> = fits.iter().map(|f| f.coef[k]).collect();
        let std_errors: Vec<f64> = fits.iter().map(|f| f.se[k]).collect();
        let result = mi_combine(&MiInput {
            estimates: estimates.clone(),
            std_errors: std_errors.clone(),
            level: args.level,
            df_method: method,
            vcom,
        })
        .or_fail(FailureKind::Config)?;
        print_result(name, &result);
        coefficients.push(Coefficient {
            name: name.clone(),
            estimates,
            std_errors,
            result,
        });
    }
    let report = CombineReport {
        formula: formula.to_string(),
        family: family.to_string(),
        coefficients,
    };
    if let Some(out) = &args.out {
        write_json(Path::new(out), &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Tally {
    total: Vec<usize>,
    excl_singletons: Vec<usize>,
    mean_total: f64,
    sd_total: f64,
    mean_excl_singletons: f64,
    sd_excl_singletons: f64,
}

fn mean_sd(xs: &[usize]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<usize>() as f64 / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn tally(set: &PermutationSet, truth: &TruthMap, index: &BlockIndex) -> Tally {
    let counts: Vec<_> = set.columns.iter().map(|c| count_correct(c, truth, index)).collect();
    let total: Vec<usize> = counts.iter().map(|c| c.total).collect();
    let excl: Vec<usize> = counts.iter().map(|c| c.excl_singletons).collect();
    let (mean_total, sd_total) = mean_sd(&total);
    let (mean_excl, sd_excl) = mean_sd(&excl);
    Tally {
        total,
        excl_singletons: excl,
        mean_total,
        sd_total,
        mean_excl_singletons: mean_excl,
        sd_excl_singletons: sd_excl,
    }
}

#[derive(Serialize)]
struct Evaluation {
    samples: Tally,
    baseline: Option<Tally>,
}

pub fn evaluate(args: EvaluateArgs) -> Outcome {
    let Inputs { a, b } = load_inputs(&args.input)?;
    let index = BlockIndex::build(&a, &b);
    let set = PermutationSet::read_csv(&args.perm).or_fail(FailureKind::Data)?;
    let truth = TruthMap::read(&args.truth).or_fail(FailureKind::Data)?;
    if set.is_empty() {
        return Err(config_error(format!("{} has no samples", args.perm)));
    }
    if set.n_a != a.len() || truth.b_for_a.len() != a.len() {
        return Err(Failure {
            kind: FailureKind::Data,
            error: anyhow!(
                "file A has {} rows but the permutation has {} and the truth {}",
                a.len(),
                set.n_a,
                truth.b_for_a.len()
            ),
        });
    }
    let samples = tally(&set, &truth, &index);
    println!("{:>8} {:>14} {:>24}", "sample", "correct links", "excl. singleton blocks");
    for (m, (t, e)) in samples.total.iter().zip(&samples.excl_singletons).enumerate() {
        println!("{m:>8} {t:>14} {e:>24}");
    }
    println!(
        "{:>8} {:>14.2} {:>24.2}   sd {:.2} / {:.2}",
        "mean", samples.mean_total, samples.mean_excl_singletons, samples.sd_total, samples.sd_excl_singletons
    );
    let baseline = match args.baseline {
        Some(0) => return Err(config_error("--baseline must be positive")),
        Some(m) => {
            let seed = resolve_seed(args.seed);
            let t = tally(&random_baseline(&index, m, seed), &truth, &index);
            println!(
                "{:>8} {:>14.2} {:>24.2}   sd {:.2} / {:.2}",
                "random", t.mean_total, t.mean_excl_singletons, t.sd_total, t.sd_excl_singletons
            );
            Some(t)
        }
        None => None,
    };
    if let Some(out) = &args.out {
        write_json(Path::new(out), &Evaluation { samples, baseline })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationRecord {
    seed: u64,
    n: usize,
    block_mean: f64,
    intercept: f64,
    slopes: [f64; 2],
    correlation: f64,
    noise_sd: f64,
    d_intercept: f64,
    d_slope: f64,
    singleton_fraction: f64,
}

pub fn simulate(args: SimulateArgs) -> Outcome {
    if args.n == 0 {
        return Err(config_error("--n must be positive"));
    }
    if !(args.correlation > 0.0 && args.correlation <= 1.0) {
        return Err(config_error("--correlation must lie in (0, 1]"));
    }
    if !(args.block_mean >= 2.0) {
        return Err(config_error("--block-mean must be at least 2"));
    }
    let side = match args.drop_side.to_ascii_lowercase().as_str() {
        "a" => DropSide::A,
        "b" => DropSide::B,
        other => return Err(config_error(format!("--drop-side must be a or b, not {other}"))),
    };
    let seed = resolve_seed(args.seed);
    let model = GenerativeModel {
        correlation: args.correlation,
        singleton_fraction: args.singleton_fraction,
        ..GenerativeModel::default()
    };
    let mut rng = stream(seed, StreamKind::Harness, 0, 0);
    let complete = synthesize(args.n, args.block_mean, &model, &mut rng);
    let options = SplitOptions {
        drop_fraction: args.drop_fraction,
        side,
    };
    let split = split_complete(&complete, &["X1", "X2"], &["Y", "D"], options, &mut rng).or_fail(FailureKind::Config)?;

    let out = PathBuf::from(&args.out);
    fs::create_dir_all(&out)
        .with_context(|| format!("cannot create {}", out.display()))
        .or_fail(FailureKind::Data)?;
    write_table(&complete, out.join("complete.csv")).or_fail(FailureKind::Data)?;
    write_table(&split.a, out.join("A.csv")).or_fail(FailureKind::Data)?;
    write_table(&split.b, out.join("B.csv")).or_fail(FailureKind::Data)?;
    split.truth.write(out.join("truth.csv")).or_fail(FailureKind::Data)?;
    write_json(
        &out.join("model.json"),
        &SimulationRecord {
            seed,
            n: args.n,
            block_mean: args.block_mean,
            intercept: model.intercept,
            slopes: model.slopes,
            correlation: model.correlation,
            noise_sd: model.noise_sd(),
            d_intercept: model.d_intercept,
            d_slope: model.d_slope,
            singleton_fraction: model.singleton_fraction,
        },
    )?;
    println!(
        "wrote {} A rows and {} B rows to {}",
        split.a.len(),
        split.b.len(),
        out.display()
    );
    Ok(())
}
