//! C ABI over the `reex` engine.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free` function. Every fallible call returns a
//! [`ReexStatus`]; on failure [`reex_last_error_message`] describes the error
//! for the calling thread. Strings returned through out-pointers are
//! NUL-terminated UTF-8 and must be released with [`reex_string_free`].

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use reex::explanations::ExplanationError;
use reex::mapping::MappingError;
use reex::metrics::MetricsError;
use reex::ontology::OntologyError;
use reex::pipeline::{self, RunParams};
use reex::reasoning::ReasonError;
use reex::{
    Algorithm, AnnotationMap, Error, Explanations, IcTable, Ontology, OutputFormat, RelationKind,
    TermId,
};

pub const REEX_RELATION_IS_A: u32 = 1;
pub const REEX_RELATION_PART_OF: u32 = 1 << 1;
pub const REEX_RELATION_REGULATES: u32 = 1 << 2;
pub const REEX_RELATION_NEGATIVELY_REGULATES: u32 = 1 << 3;
pub const REEX_RELATION_POSITIVELY_REGULATES: u32 = 1 << 4;
/// Traverse every relation kind.
pub const REEX_RELATION_ALL: u32 = 0x1f;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReexStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ValidationError = 4,
    LookupError = 5,
    InvalidArgument = 6,
    ReasoningError = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReexAlgorithm {
    Staircase = 0,
    Ancestry = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReexFormat {
    Text = 0,
    Json = 1,
    Csv = 2,
}

/// Parameters for [`reex_run`]. Start from [`reex_run_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ReexRunOptions {
    pub algorithm: ReexAlgorithm,
    pub threshold: f64,
    pub weight: f64,
    pub min_terms: usize,
    pub step: f64,
    pub seed: u64,
    pub use_absolute: bool,
    pub include_misclassified: bool,
    pub ic_from_dataset: bool,
    /// Pass limit per class; 0 uses the number of ontology terms.
    pub max_iterations: usize,
    pub format: ReexFormat,
}

/// Parsed ontology.
pub struct ReexOntology(Ontology);

/// Parsed feature annotation map, already filtered against an ontology.
pub struct ReexMapping(AnnotationMap);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

struct Failure(ReexStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } | Error::Mapping { .. } | Error::Explanations { .. } => {
                ReexStatus::ParseError
            }
            Error::Ontology { source, .. } => ontology_status(source),
            Error::Threshold(inner) => explanation_status(inner),
            Error::Reasoning(inner) => reasoning_status(inner),
            Error::Metrics(inner) => metrics_status(inner),
            Error::Argument(_) => ReexStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn ontology_status(e: &OntologyError) -> ReexStatus {
    match e {
        OntologyError::Cycle { .. } => ReexStatus::ValidationError,
        OntologyError::UnknownTerm(_) => ReexStatus::LookupError,
        OntologyError::SameTerm(_) | OntologyError::UnknownRelation(_) => {
            ReexStatus::InvalidArgument
        }
        _ => ReexStatus::ParseError,
    }
}

fn explanation_status(e: &ExplanationError) -> ReexStatus {
    match e {
        ExplanationError::UnknownClass(_) => ReexStatus::LookupError,
        ExplanationError::InvalidParameter(_) => ReexStatus::InvalidArgument,
        _ => ReexStatus::ParseError,
    }
}

fn reasoning_status(e: &ReasonError) -> ReexStatus {
    match e {
        ReasonError::UnknownStartingTerm { .. }
        | ReasonError::UnknownTerm(_)
        | ReasonError::UnknownClass(_) => ReexStatus::LookupError,
        ReasonError::InvalidParameter(_) => ReexStatus::InvalidArgument,
        ReasonError::IterationLimit { .. } => ReexStatus::ReasoningError,
    }
}

fn metrics_status(e: &MetricsError) -> ReexStatus {
    match e {
        MetricsError::UnknownTerm(_) => ReexStatus::LookupError,
        _ => ReexStatus::InvalidArgument,
    }
}

impl From<OntologyError> for Failure {
    fn from(e: OntologyError) -> Self {
        Failure(ontology_status(&e), e.to_string())
    }
}

impl From<MappingError> for Failure {
    fn from(e: MappingError) -> Self {
        Failure(ReexStatus::ParseError, e.to_string())
    }
}

impl From<ExplanationError> for Failure {
    fn from(e: ExplanationError) -> Self {
        Failure(explanation_status(&e), e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure(metrics_status(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ReexStatus::NullArgument, format!("`{what}` is NULL"))
}

/// Runs `f`, records any failure for [`reex_last_error_message`] and turns
/// panics into [`ReexStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ReexStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ReexStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            ReexStatus::Panic
        }
    }
}

unsafe fn bytes<'a>(data: *const u8, len: usize, what: &str) -> Result<&'a [u8], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        Failure(
            ReexStatus::InvalidUtf8,
            format!("`{what}` is not valid UTF-8"),
        )
    })
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn relations(mask: u32) -> Result<BTreeSet<RelationKind>, Failure> {
    if mask & !REEX_RELATION_ALL != 0 {
        return Err(Failure(
            ReexStatus::InvalidArgument,
            format!("unknown relation bits in mask {mask:#x}"),
        ));
    }
    if mask == 0 {
        return Ok(RelationKind::all());
    }
    Ok(RelationKind::ALL
        .into_iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, k)| k)
        .collect())
}

fn out_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(ReexStatus::InvalidArgument, "output contains NUL".into()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn reex_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn reex_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn reex_run_options_default() -> ReexRunOptions {
    let d = RunParams::default();
    ReexRunOptions {
        algorithm: ReexAlgorithm::Staircase,
        threshold: d.threshold,
        weight: d.weight,
        min_terms: d.min_terms,
        step: d.step,
        seed: d.seed,
        use_absolute: d.use_absolute,
        include_misclassified: d.include_misclassified,
        ic_from_dataset: d.ic_from_dataset,
        max_iterations: 0,
        format: ReexFormat::Text,
    }
}

/// Parses OBO text. `relations` is a mask of `REEX_RELATION_*` bits; 0 means all.
///
/// # Safety
/// `data` must point to `len` readable bytes (or may be NULL when `len` is 0)
/// and `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn reex_ontology_parse(
    data: *const u8,
    len: usize,
    relations_mask: u32,
    out: *mut *mut ReexOntology,
) -> ReexStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let input = bytes(data, len, "data")?;
        let ontology = Ontology::parse_obo(input, &relations(relations_mask)?)?;
        *out = Box::into_raw(Box::new(ReexOntology(ontology)));
        Ok(())
    })
}

/// # Safety
/// `ontology` must be NULL or a handle from [`reex_ontology_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn reex_ontology_free(ontology: *mut ReexOntology) {
    if !ontology.is_null() {
        drop(Box::from_raw(ontology));
    }
}

/// Number of terms, or 0 for a NULL handle.
///
/// # Safety
/// `ontology` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn reex_ontology_term_count(ontology: *const ReexOntology) -> usize {
    ontology.as_ref().map_or(0, |o| o.0.len())
}

/// Size of the reflexive descendant set of `term`.
///
/// # Safety
/// `ontology` must be a live handle, `term` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn reex_ontology_descendant_count(
    ontology: *const ReexOntology,
    term: *const c_char,
    out: *mut usize,
) -> ReexStatus {
    guard(|| {
        let o = handle(ontology, "ontology")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = o.0.descendants(text(term, "term")?)?.len();
        Ok(())
    })
}

/// Lowest common ancestor of two distinct terms. When the terms share no
/// ancestor the call succeeds with `*out_term` set to NULL.
///
/// # Safety
/// `ontology` must be a live handle, `a` and `b` NUL-terminated strings, and
/// `out_term`/`out_depth` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn reex_ontology_lca(
    ontology: *const ReexOntology,
    a: *const c_char,
    b: *const c_char,
    out_term: *mut *mut c_char,
    out_depth: *mut u32,
) -> ReexStatus {
    guard(|| {
        let o = handle(ontology, "ontology")?;
        let out_term = out_term.as_mut().ok_or_else(|| null("out_term"))?;
        let out_depth = out_depth.as_mut().ok_or_else(|| null("out_depth"))?;
        *out_term = ptr::null_mut();
        *out_depth = 0;
        if let Some((anc, depth)) = o.0.lowest_common_ancestor(text(a, "a")?, text(b, "b")?)? {
            *out_term = out_string(anc.to_string())?;
            *out_depth = depth;
        }
        Ok(())
    })
}

/// Parses a `feature<TAB>term[,term...]` mapping, dropping terms absent from
/// `ontology`.
///
/// # Safety
/// `data` must point to `len` readable bytes, `ontology` must be a live
/// handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn reex_mapping_parse(
    data: *const u8,
    len: usize,
    ontology: *const ReexOntology,
    out: *mut *mut ReexMapping,
) -> ReexStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let o = handle(ontology, "ontology")?;
        let map = AnnotationMap::parse_for(bytes(data, len, "data")?, &o.0)?;
        *out = Box::into_raw(Box::new(ReexMapping(map)));
        Ok(())
    })
}

/// # Safety
/// `mapping` must be NULL or a handle from [`reex_mapping_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn reex_mapping_free(mapping: *mut ReexMapping) {
    if !mapping.is_null() {
        drop(Box::from_raw(mapping));
    }
}

/// Number of distinct features, or 0 for a NULL handle.
///
/// # Safety
/// `mapping` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn reex_mapping_feature_count(mapping: *const ReexMapping) -> usize {
    mapping.as_ref().map_or(0, |m| m.0.universe_size())
}

/// GenQ of a set of `count` term ids, with priors from `mapping`.
///
/// # Safety
/// Handles must be live, `terms` must point to `count` NUL-terminated
/// strings and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn reex_genq(
    ontology: *const ReexOntology,
    mapping: *const ReexMapping,
    terms: *const *const c_char,
    count: usize,
    out: *mut f64,
) -> ReexStatus {
    guard(|| {
        let o = handle(ontology, "ontology")?;
        let m = handle(mapping, "mapping")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let ptrs = if count == 0 {
            &[][..]
        } else if terms.is_null() {
            return Err(null("terms"));
        } else {
            std::slice::from_raw_parts(terms, count)
        };
        let ids = ptrs
            .iter()
            .map(|&p| text(p, "terms[i]").map(TermId::from))
            .collect::<Result<Vec<_>, _>>()?;
        let table = IcTable::build(&m.0.term_annotation_counts(&o.0), m.0.universe_size())?;
        *out = table.genq(&ids)?;
        Ok(())
    })
}

/// Runs the full pipeline over an interchange JSON document and returns the
/// rendered report in `*out_report`.
///
/// # Safety
/// Handles must be live, `explanations` must point to `len` readable bytes,
/// `options` must be NULL (defaults) or point to a valid
/// [`ReexRunOptions`], and `out_report` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn reex_run(
    ontology: *const ReexOntology,
    mapping: *const ReexMapping,
    explanations: *const u8,
    len: usize,
    options: *const ReexRunOptions,
    out_report: *mut *mut c_char,
) -> ReexStatus {
    guard(|| {
        let out = out_report.as_mut().ok_or_else(|| null("out_report"))?;
        *out = ptr::null_mut();
        let o = handle(ontology, "ontology")?;
        let m = handle(mapping, "mapping")?;
        let opts = options
            .as_ref()
            .copied()
            .unwrap_or_else(|| reex_run_options_default());
        let e = Explanations::parse(bytes(explanations, len, "explanations")?)?;
        let params = RunParams {
            algorithm: match opts.algorithm {
                ReexAlgorithm::Staircase => Algorithm::SelectiveStaircase,
                ReexAlgorithm::Ancestry => Algorithm::Ancestry,
            },
            threshold: opts.threshold,
            weight: opts.weight,
            min_terms: opts.min_terms,
            step: opts.step,
            seed: opts.seed,
            use_absolute: opts.use_absolute,
            include_misclassified: opts.include_misclassified,
            ic_from_dataset: opts.ic_from_dataset,
            max_iterations: (opts.max_iterations > 0).then_some(opts.max_iterations),
        };
        let format = match opts.format {
            ReexFormat::Text => OutputFormat::Text,
            ReexFormat::Json => OutputFormat::Json,
            ReexFormat::Csv => OutputFormat::Csv,
        };
        let outcome = pipeline::run_parts(&o.0, &m.0, &e, &params)?;
        *out = out_string(outcome.report.render(format)?)?;
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn reex_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
