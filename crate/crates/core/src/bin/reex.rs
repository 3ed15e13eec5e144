use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use reex::pipeline::{self, Inputs, RunConfig, RunParams, SweepGrid};
use reex::{Algorithm, AnnotationMap, Error, Explanations, IcTable, OutputFormat, RelationKind};

#[derive(Parser, Debug)]
#[command(
    name = "reex",
    version,
    about = "Generalize model explanations into class-specific ontology terms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full pipeline once and print or write the report
    Reason(ReasonArgs),
    /// Run the pipeline over a parameter grid and write a CSV summary
    Sweep(SweepArgs),
    /// Score explicit per-class term sets with GenQ
    Genq(GenqArgs),
    /// Parse inputs and report what was found
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct InputArgs {
    #[arg(long)]
    ontology: PathBuf,
    #[arg(long)]
    mapping: PathBuf,
    #[arg(long)]
    explanations: PathBuf,
    /// Comma-separated relation kinds to traverse
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "is_a,part_of,regulates,negatively_regulates,positively_regulates"
    )]
    relations: Vec<RelationKind>,
}

#[derive(Args, Debug)]
struct ParamArgs {
    #[arg(long, default_value = "staircase")]
    algorithm: Algorithm,
    /// Staircase: largest accepted intersection ratio
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// Ancestry: acceptance weight
    #[arg(long, default_value_t = 1e-6)]
    weight: f64,
    #[arg(long, default_value_t = 10)]
    min_terms: usize,
    /// Multiplicative decay of the per-class threshold
    #[arg(long, default_value_t = 0.975)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Average absolute attribution values (default)
    #[arg(long, overrides_with = "signed")]
    absolute: bool,
    /// Average signed attribution values
    #[arg(long, overrides_with = "absolute")]
    signed: bool,
    /// Also average misclassified instances, grouped by true class
    #[arg(long)]
    include_misclassified: bool,
    /// Estimate term priors from the explained features only
    #[arg(long)]
    ic_from_dataset: bool,
    #[arg(long)]
    max_iterations: Option<usize>,
}

impl ParamArgs {
    fn params(&self) -> RunParams {
        RunParams {
            algorithm: self.algorithm,
            threshold: self.threshold,
            weight: self.weight,
            min_terms: self.min_terms,
            step: self.step,
            seed: self.seed,
            use_absolute: !self.signed,
            include_misclassified: self.include_misclassified,
            ic_from_dataset: self.ic_from_dataset,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Args, Debug)]
struct ReasonArgs {
    #[command(flatten)]
    inputs: InputArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "text")]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    inputs: InputArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Grid axis `name=v1,v2,...`; repeat for a Cartesian product.
    /// Names: algorithm, threshold, weight, min-terms, step, seed, absolute.
    #[arg(long = "grid", required = true)]
    grid: Vec<String>,
    #[arg(long, env = "REEX_WORKERS")]
    workers: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenqArgs {
    #[arg(long)]
    ontology: PathBuf,
    #[arg(long)]
    mapping: PathBuf,
    /// Lines of `class<TAB>term[,term...]`
    #[arg(long)]
    terms: PathBuf,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "is_a,part_of,regulates,negatively_regulates,positively_regulates"
    )]
    relations: Vec<RelationKind>,
    #[arg(long, default_value = "text")]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    ontology: Option<PathBuf>,
    #[arg(long)]
    mapping: Option<PathBuf>,
    #[arg(long)]
    explanations: Option<PathBuf>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "is_a,part_of,regulates,negatively_regulates,positively_regulates"
    )]
    relations: Vec<RelationKind>,
}

fn relations(list: &[RelationKind]) -> BTreeSet<RelationKind> {
    list.iter().copied().collect()
}

fn write_or_print(output: Option<&Path>, text: &str) -> reex::Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn reason(args: ReasonArgs) -> reex::Result<()> {
    let config = RunConfig {
        ontology_path: args.inputs.ontology,
        mapping_path: args.inputs.mapping,
        explanations_path: args.inputs.explanations,
        relations: relations(&args.inputs.relations),
        params: args.params.params(),
        output_path: args.output,
        format: args.format,
    };
    let (_, rendered) = pipeline::run_pipeline(&config)?;
    if config.output_path.is_none() {
        print!("{rendered}");
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> reex::Result<()> {
    let mut grid = SweepGrid::new();
    for axis in &args.grid {
        grid = grid.parse_axis(axis)?;
    }
    let config = RunConfig {
        relations: relations(&args.inputs.relations),
        ..RunConfig::new(
            args.inputs.ontology,
            args.inputs.mapping,
            args.inputs.explanations,
        )
    };
    let inputs = Inputs::load(&config)?;
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let summary = pipeline::run_sweep(&inputs, &args.params.params(), &grid, workers)?;
    write_or_print(args.output.as_deref(), &summary)
}

fn genq(args: GenqArgs) -> reex::Result<()> {
    let ontology = pipeline::load_ontology(&args.ontology, &relations(&args.relations))?;
    let mapping = pipeline::load_mapping(&args.mapping, Some(&ontology))?;
    let table = IcTable::build(
        &mapping.term_annotation_counts(&ontology),
        mapping.universe_size(),
    )?;
    // The term-set file shares the mapping's line format, with classes in place of features.
    let sets = pipeline::load_mapping(&args.terms, None)?;
    let mut scores = BTreeMap::new();
    for (class, terms) in sets.iter() {
        scores.insert(class.to_string(), table.genq(terms)?);
    }
    let text = match args.format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&scores).expect("map of floats serializes");
            s.push('\n');
            s
        }
        _ => scores
            .iter()
            .map(|(class, g)| format!("{class}\t{g}\n"))
            .collect(),
    };
    print!("{text}");
    Ok(())
}

fn validate(args: ValidateArgs) -> reex::Result<()> {
    if args.ontology.is_none() && args.mapping.is_none() && args.explanations.is_none() {
        return Err(Error::Argument(
            "nothing to validate: pass --ontology, --mapping and/or --explanations".into(),
        ));
    }
    let ontology = args
        .ontology
        .as_deref()
        .map(|p| pipeline::load_ontology(p, &relations(&args.relations)))
        .transpose()?;
    if let Some(o) = &ontology {
        let unknown: usize = o.unknown_relations().values().sum();
        println!(
            "ontology: {} terms, {} edges, {} unrecognized relationship lines",
            o.len(),
            o.edges().count(),
            unknown
        );
    }
    let mapping: Option<AnnotationMap> = args
        .mapping
        .as_deref()
        .map(|p| pipeline::load_mapping(p, ontology.as_ref()))
        .transpose()?;
    if let Some(m) = &mapping {
        println!(
            "mapping: {} features, {} annotations to unknown terms dropped",
            m.universe_size(),
            m.dropped_terms()
        );
    }
    if let Some(path) = &args.explanations {
        let e = pipeline::load_explanations(path)?;
        let kind = match &e {
            Explanations::Instances(set) => format!("{} instances", set.instances.len()),
            Explanations::Aggregated(_) => "pre-aggregated".to_owned(),
        };
        println!(
            "explanations: {kind}, {} classes, {} features",
            e.classes().len(),
            e.features().len()
        );
        if let Some(m) = &mapping {
            let unmapped = e
                .features()
                .iter()
                .filter(|f| m.terms_of(f.as_str()).is_none())
                .count();
            println!("explanations: {unmapped} features absent from the mapping");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Reason(a) => reason(a),
        Command::Sweep(a) => sweep(a),
        Command::Genq(a) => genq(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("reex: {e}");
            ExitCode::FAILURE
        }
    }
}
