//! End-to-end runs: load inputs, aggregate, threshold, reason, score, render.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;

use crate::explanations::{AggregateOptions, Explanations, Selection, StartingTermSets};
use crate::mapping::AnnotationMap;
use crate::metrics::{GenQReport, IcTable, OutputFormat};
use crate::ontology::{Ontology, RelationKind};
use crate::reasoning::{self, Algorithm, ClassTermSets, ReasoningConfig};
use crate::{Error, Result};

/// Parameters that vary between runs over the same inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub algorithm: Algorithm,
    pub threshold: f64,
    pub weight: f64,
    pub min_terms: usize,
    pub step: f64,
    pub seed: u64,
    pub use_absolute: bool,
    pub include_misclassified: bool,
    /// Estimate term priors from the explained features only instead of the
    /// whole annotation map.
    pub ic_from_dataset: bool,
    pub max_iterations: Option<usize>,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            algorithm: Algorithm::SelectiveStaircase,
            threshold: 0.0,
            weight: 1e-6,
            min_terms: 10,
            step: 0.975,
            seed: 0,
            use_absolute: true,
            include_misclassified: false,
            ic_from_dataset: false,
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ontology_path: PathBuf,
    pub mapping_path: PathBuf,
    pub explanations_path: PathBuf,
    pub relations: BTreeSet<RelationKind>,
    pub params: RunParams,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn new(
        ontology: impl Into<PathBuf>,
        mapping: impl Into<PathBuf>,
        explanations: impl Into<PathBuf>,
    ) -> Self {
        RunConfig {
            ontology_path: ontology.into(),
            mapping_path: mapping.into(),
            explanations_path: explanations.into(),
            relations: RelationKind::all(),
            params: RunParams::default(),
            output_path: None,
            format: OutputFormat::Text,
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
}

pub fn load_ontology(path: &Path, relations: &BTreeSet<RelationKind>) -> Result<Ontology> {
    Ontology::parse_obo(open(path)?, relations).map_err(|source| Error::Ontology {
        path: path.to_owned(),
        source,
    })
}

pub fn load_mapping(path: &Path, ontology: Option<&Ontology>) -> Result<AnnotationMap> {
    let reader = open(path)?;
    let parsed = match ontology {
        Some(o) => AnnotationMap::parse_for(reader, o),
        None => AnnotationMap::parse(reader),
    };
    parsed.map_err(|source| Error::Mapping {
        path: path.to_owned(),
        source,
    })
}

pub fn load_explanations(path: &Path) -> Result<Explanations> {
    Explanations::parse(open(path)?).map_err(|source| Error::Explanations {
        path: path.to_owned(),
        source,
    })
}

/// Parsed inputs shared by every run of a sweep.
#[derive(Debug)]
pub struct Inputs {
    pub ontology: Ontology,
    pub mapping: AnnotationMap,
    pub explanations: Explanations,
    full_ic: OnceLock<std::result::Result<IcTable, String>>,
}

impl Inputs {
    pub fn new(ontology: Ontology, mapping: AnnotationMap, explanations: Explanations) -> Self {
        Inputs {
            ontology,
            mapping,
            explanations,
            full_ic: OnceLock::new(),
        }
    }

    pub fn load(config: &RunConfig) -> Result<Self> {
        let ontology = load_ontology(&config.ontology_path, &config.relations)?;
        let mapping = load_mapping(&config.mapping_path, Some(&ontology))?;
        let explanations = load_explanations(&config.explanations_path)?;
        Ok(Inputs::new(ontology, mapping, explanations))
    }

    fn ic_table(&self, restrict: bool) -> Result<IcTable> {
        if restrict {
            return ic_table(&self.ontology, &self.mapping, &self.explanations, true);
        }
        self.full_ic
            .get_or_init(|| {
                ic_table(&self.ontology, &self.mapping, &self.explanations, false)
                    .map_err(|e| e.to_string())
            })
            .clone()
            .map_err(Error::Argument)
    }
}

fn ic_table(
    ontology: &Ontology,
    mapping: &AnnotationMap,
    explanations: &Explanations,
    restrict: bool,
) -> Result<IcTable> {
    let restricted;
    let map = if restrict {
        restricted = mapping.restricted_to(explanations.features());
        if restricted.universe_size() == 0 {
            return Err(Error::Argument(
                "no explained feature appears in the annotation map".into(),
            ));
        }
        &restricted
    } else {
        mapping
    };
    Ok(IcTable::build(
        &map.term_annotation_counts(ontology),
        map.universe_size(),
    )?)
}

/// Everything a run produces, for callers that need more than the report.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub selections: BTreeMap<String, Selection>,
    pub start: StartingTermSets,
    pub sets: ClassTermSets,
    pub report: GenQReport,
}

pub fn run(inputs: &Inputs, params: &RunParams) -> Result<RunOutcome> {
    let table = inputs.ic_table(params.ic_from_dataset)?;
    execute(
        &inputs.ontology,
        &inputs.mapping,
        &inputs.explanations,
        &table,
        params,
    )
}

/// Same as [`run`] over borrowed parts; the information content table is
/// rebuilt on every call.
pub fn run_parts(
    ontology: &Ontology,
    mapping: &AnnotationMap,
    explanations: &Explanations,
    params: &RunParams,
) -> Result<RunOutcome> {
    let table = ic_table(ontology, mapping, explanations, params.ic_from_dataset)?;
    execute(ontology, mapping, explanations, &table, params)
}

fn execute(
    ontology: &Ontology,
    mapping: &AnnotationMap,
    explanations: &Explanations,
    table: &IcTable,
    params: &RunParams,
) -> Result<RunOutcome> {
    let aggregated = explanations.clone().into_aggregated(AggregateOptions {
        use_absolute: params.use_absolute,
        include_misclassified: params.include_misclassified,
    });

    let mut selections = BTreeMap::new();
    for class in &aggregated.classes {
        let sel = aggregated.dynamic_threshold(class, params.min_terms, params.step)?;
        selections.insert(class.clone(), sel);
    }
    let selected = selections
        .iter()
        .map(|(c, s)| (c.clone(), s.features.clone()))
        .collect();
    let start = StartingTermSets::from_selection(&selected, mapping);

    let sets = reasoning::generalize(
        ontology,
        &start,
        &ReasoningConfig {
            algorithm: params.algorithm,
            threshold: params.threshold,
            weight: params.weight,
            seed: params.seed,
            max_iterations: params.max_iterations,
        },
    )?;
    let report = GenQReport::build(&sets, &start, table, ontology)?;
    Ok(RunOutcome {
        selections,
        start,
        sets,
        report,
    })
}

/// Loads inputs, runs once, renders the report and writes it when an output
/// path is configured.
pub fn run_pipeline(config: &RunConfig) -> Result<(GenQReport, String)> {
    let inputs = Inputs::load(config)?;
    let outcome = run(&inputs, &config.params)?;
    let rendered = outcome.report.render(config.format)?;
    if let Some(path) = &config.output_path {
        std::fs::write(path, &rendered).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
    }
    Ok((outcome.report, rendered))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Algorithm,
    Threshold,
    Weight,
    MinTerms,
    Step,
    Seed,
    Absolute,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "algorithm" => SweepParam::Algorithm,
            "threshold" => SweepParam::Threshold,
            "weight" => SweepParam::Weight,
            "min-terms" | "min_terms" => SweepParam::MinTerms,
            "step" => SweepParam::Step,
            "seed" => SweepParam::Seed,
            "absolute" => SweepParam::Absolute,
            other => {
                return Err(Error::Argument(format!(
                    "unknown sweep parameter `{other}`"
                )))
            }
        })
    }
}

impl SweepParam {
    fn apply(self, params: &mut RunParams, value: &str) -> Result<()> {
        let bad = |e: &dyn std::fmt::Display| {
            Error::Argument(format!("invalid value `{value}` for {self:?}: {e}"))
        };
        match self {
            SweepParam::Algorithm => params.algorithm = value.parse().map_err(|e| bad(&e))?,
            SweepParam::Threshold => params.threshold = value.parse().map_err(|e| bad(&e))?,
            SweepParam::Weight => params.weight = value.parse().map_err(|e| bad(&e))?,
            SweepParam::MinTerms => params.min_terms = value.parse().map_err(|e| bad(&e))?,
            SweepParam::Step => params.step = value.parse().map_err(|e| bad(&e))?,
            SweepParam::Seed => params.seed = value.parse().map_err(|e| bad(&e))?,
            SweepParam::Absolute => params.use_absolute = value.parse().map_err(|e| bad(&e))?,
        }
        Ok(())
    }
}

/// Cartesian grid of parameter values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    axes: Vec<(SweepParam, Vec<String>)>,
}

impl SweepGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn axis(
        mut self,
        param: SweepParam,
        values: impl IntoIterator<Item = impl ToString>,
    ) -> Self {
        self.axes
            .push((param, values.into_iter().map(|v| v.to_string()).collect()));
        self
    }

    /// Parses `name=v1,v2,...`.
    pub fn parse_axis(mut self, spec: &str) -> Result<Self> {
        let (name, values) = spec.split_once('=').ok_or_else(|| {
            Error::Argument(format!("grid axis `{spec}` is not `name=v1,v2,...`"))
        })?;
        let values: Vec<String> = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(str::to_owned)
            .collect();
        self.axes.push((name.trim().parse()?, values));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every grid point applied to `base`, first axis varying slowest.
    pub fn expand(&self, base: &RunParams) -> Result<Vec<RunParams>> {
        if self.axes.is_empty() {
            return Err(Error::Argument("sweep grid has no axes".into()));
        }
        if let Some((param, _)) = self.axes.iter().find(|(_, v)| v.is_empty()) {
            return Err(Error::Argument(format!(
                "sweep axis {param:?} has no values"
            )));
        }
        let mut points = vec![base.clone()];
        for (param, values) in &self.axes {
            let mut next = Vec::with_capacity(points.len() * values.len());
            for p in &points {
                for v in values {
                    let mut q = p.clone();
                    param.apply(&mut q, v)?;
                    next.push(q);
                }
            }
            points = next;
        }
        Ok(points)
    }
}

const SWEEP_HEADER: [&str; 20] = [
    "run",
    "algorithm",
    "threshold",
    "weight",
    "min_terms",
    "step",
    "seed",
    "absolute",
    "classes",
    "mean_genq",
    "mean_baseline_genq",
    "term_count",
    "baseline_term_count",
    "mean_depth",
    "class_genq",
    "class_baseline_genq",
    "class_term_count",
    "class_mean_depth",
    "wall_ms",
    "error",
];

fn packed<T: std::fmt::Display>(
    report: &GenQReport,
    f: impl Fn(&crate::metrics::ClassReport) -> T,
) -> String {
    let mut s = String::new();
    for (i, (class, r)) in report.per_class.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        let _ = write!(s, "{class}={}", f(r));
    }
    s
}

fn mean(values: impl Iterator<Item = f64>) -> String {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        String::new()
    } else {
        (sum / n as f64).to_string()
    }
}

/// Runs every grid point on a pool of `workers` threads and returns a CSV
/// summary with one row per run, in grid order. A failing run records its
/// error in the row and the sweep continues.
pub fn run_sweep(
    inputs: &Inputs,
    base: &RunParams,
    grid: &SweepGrid,
    workers: usize,
) -> Result<String> {
    let points = grid.expand(base)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(std::result::Result<GenQReport, String>, u128)> = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let started = Instant::now();
                let result = run(inputs, p).map(|o| o.report).map_err(|e| e.to_string());
                (result, started.elapsed().as_millis())
            })
            .collect()
    });

    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Argument(format!("cannot write sweep summary: {e}"));
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for (i, (p, (result, ms))) in points.iter().zip(results).enumerate() {
        let mut row = vec![
            i.to_string(),
            p.algorithm.to_string(),
            p.threshold.to_string(),
            p.weight.to_string(),
            p.min_terms.to_string(),
            p.step.to_string(),
            p.seed.to_string(),
            p.use_absolute.to_string(),
        ];
        match result {
            Ok(r) => {
                let classes = r.per_class.values();
                row.extend([
                    r.per_class.len().to_string(),
                    mean(classes.clone().map(|c| c.genq)),
                    mean(classes.clone().map(|c| c.baseline_genq)),
                    classes
                        .clone()
                        .map(|c| c.term_count)
                        .sum::<usize>()
                        .to_string(),
                    classes
                        .clone()
                        .map(|c| c.baseline_term_count)
                        .sum::<usize>()
                        .to_string(),
                    mean(classes.map(|c| c.mean_depth)),
                    packed(&r, |c| c.genq),
                    packed(&r, |c| c.baseline_genq),
                    packed(&r, |c| c.term_count),
                    packed(&r, |c| c.mean_depth),
                    ms.to_string(),
                    String::new(),
                ]);
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 10));
                row.extend([ms.to_string(), e]);
            }
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Argument(format!("cannot write sweep summary: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Argument(e.to_string()))
}
