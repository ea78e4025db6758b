//! C interface to the toolkit.
//!
//! Datasets and splits are opaque handles created and freed through this
//! interface. Every fallible function returns a [`GpStatus`]; on failure
//! the message is kept per thread and can be copied out with
//! [`gp_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use gcnpoison::data::{generate_sbm, load_dataset, save_dataset, Dataset, SbmConfig};
use gcnpoison::defenses::{DefendedInputs, DefenseConfig};
use gcnpoison::eval::{run_experiment, ExperimentConfig};
use gcnpoison::gcn::{f1_macro, predict, TrainConfig};
use gcnpoison::graph::avg_training_neighbors;
use gcnpoison::selection::{make_split, SelectionMethod, Split};
use gcnpoison::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Io = 4,
    Parse = 5,
    Attack = 6,
    Panic = 7,
}

/// Training-set selection method.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpMethod {
    Random = 0,
    StratDegree = 1,
    GreedyCover = 2,
}

impl From<GpMethod> for SelectionMethod {
    fn from(m: GpMethod) -> Self {
        match m {
            GpMethod::Random => SelectionMethod::Random,
            GpMethod::StratDegree => SelectionMethod::StratDegree,
            GpMethod::GreedyCover => SelectionMethod::GreedyCover,
        }
    }
}

/// Opaque dataset handle.
pub struct GpDataset(Dataset);

/// Opaque split handle.
pub struct GpSplit(Split);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn status_of(e: &Error) -> GpStatus {
    match e {
        Error::InvalidArgument(_) => GpStatus::InvalidArgument,
        Error::DimensionMismatch(_) => GpStatus::DimensionMismatch,
        Error::Io { .. } => GpStatus::Io,
        Error::Parse { .. } | Error::Json { .. } | Error::Csv { .. } => GpStatus::Parse,
        Error::Target { .. } => GpStatus::Attack,
        Error::Trial { source, .. } => status_of(source),
    }
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GpStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            GpStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            GpStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Lib(Error::InvalidArgument(format!("{what} is not UTF-8"))))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (always
/// NUL-terminated when `cap > 0`) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn gp_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Generates a blockmodel dataset with one block per class.
///
/// # Safety
/// `blocks` must point to `n_blocks` sizes; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn gp_sbm_generate(
    blocks: *const usize,
    n_blocks: usize,
    inprob: f64,
    n_features: usize,
    class_features: usize,
    p_on: f64,
    p_off: f64,
    seed: u64,
    out: *mut *mut GpDataset,
) -> GpStatus {
    guard(|| {
        if blocks.is_null() {
            return Err(Failure::Null("blocks"));
        }
        let cfg = SbmConfig {
            block_sizes: std::slice::from_raw_parts(blocks, n_blocks).to_vec(),
            inprob,
            n_features,
            per_class_feature_count: class_features,
            p_feature_on_class: p_on,
            p_feature_off_class: p_off,
            seed,
        };
        let ds = generate_sbm(&cfg)?;
        put(out, Box::into_raw(Box::new(GpDataset(ds))), "out")
    })
}

/// Loads a dataset directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_dataset_load(dir: *const c_char, out: *mut *mut GpDataset) -> GpStatus {
    guard(|| {
        let ds = load_dataset(as_str(dir, "dir")?)?;
        put(out, Box::into_raw(Box::new(GpDataset(ds))), "out")
    })
}

/// Writes a dataset directory.
///
/// # Safety
/// `ds` must come from this library; `dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gp_dataset_save(ds: *const GpDataset, dir: *const c_char) -> GpStatus {
    guard(|| {
        save_dataset(&as_ref(ds, "ds")?.0, as_str(dir, "dir")?)?;
        Ok(())
    })
}

/// Node, undirected edge and class counts; any output may be null.
///
/// # Safety
/// `ds` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn gp_dataset_shape(
    ds: *const GpDataset,
    n_nodes: *mut usize,
    n_edges: *mut usize,
    n_classes: *mut usize,
) -> GpStatus {
    guard(|| {
        let ds = &as_ref(ds, "ds")?.0;
        for (p, v) in [
            (n_nodes, ds.n_nodes()),
            (n_edges, ds.graph.n_edges()),
            (n_classes, ds.n_classes),
        ] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gp_dataset_free(ds: *mut GpDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Chooses training, validation and test nodes.
///
/// # Safety
/// `ds` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_split_select(
    ds: *const GpDataset,
    method: GpMethod,
    train_frac: f64,
    val_frac: f64,
    seed: u64,
    out: *mut *mut GpSplit,
) -> GpStatus {
    guard(|| {
        let split = make_split(&as_ref(ds, "ds")?.0, method.into(), train_frac, val_frac, seed)?;
        put(out, Box::into_raw(Box::new(GpSplit(split))), "out")
    })
}

/// Loads a split written by the command-line tool.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_split_load(path: *const c_char, out: *mut *mut GpSplit) -> GpStatus {
    guard(|| {
        let split = Split::load(as_str(path, "path")?)?;
        put(out, Box::into_raw(Box::new(GpSplit(split))), "out")
    })
}

/// # Safety
/// `split` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gp_split_save(split: *const GpSplit, path: *const c_char) -> GpStatus {
    guard(|| {
        as_ref(split, "split")?.0.save(as_str(path, "path")?)?;
        Ok(())
    })
}

/// Copies up to `cap` training node ids into `buf` and stores the total
/// count in `len`. Call with `cap = 0` to query the count.
///
/// # Safety
/// `split` must come from this library; `buf` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn gp_split_train(
    split: *const GpSplit,
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> GpStatus {
    guard(|| {
        let train = &as_ref(split, "split")?.0.train;
        if cap > 0 {
            if buf.is_null() {
                return Err(Failure::Null("buf"));
            }
            let n = train.len().min(cap);
            ptr::copy_nonoverlapping(train.as_ptr(), buf, n);
        }
        put(len, train.len(), "len")
    })
}

/// Mean number of training nodes adjacent to a non-training node.
///
/// # Safety
/// Both handles must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_split_avg_training_neighbors(
    ds: *const GpDataset,
    split: *const GpSplit,
    out: *mut f64,
) -> GpStatus {
    guard(|| {
        let ds = &as_ref(ds, "ds")?.0;
        let v = avg_training_neighbors(&ds.graph, &as_ref(split, "split")?.0.train)?;
        put(out, v, "out")
    })
}

/// # Safety
/// `split` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gp_split_free(split: *mut GpSplit) {
    if !split.is_null() {
        drop(Box::from_raw(split));
    }
}

/// Trains the GCN with default hyperparameters and reports the macro-F1
/// on the test nodes.
///
/// # Safety
/// Both handles must come from this library; `macro_f1` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_train_macro_f1(
    ds: *const GpDataset,
    split: *const GpSplit,
    seed: u64,
    macro_f1: *mut f64,
) -> GpStatus {
    guard(|| {
        let ds = &as_ref(ds, "ds")?.0;
        let split = &as_ref(split, "split")?.0;
        let cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let inputs = DefendedInputs::prepare(&ds.graph, &ds.features, &DefenseConfig::default(), cfg.self_loops)?;
        let (p, _) = inputs.train(&ds.features, &ds.labels, ds.n_classes, split, &cfg)?;
        let pred = predict(&inputs.logits(&p, &ds.features)?);
        put(macro_f1, f1_macro(&pred, &ds.labels, &split.test, ds.n_classes)?, "macro_f1")
    })
}

/// Runs a full experiment from a JSON configuration (null for the
/// defaults) and writes its tables to `out_dir`.
///
/// # Safety
/// `config_json` must be null or NUL-terminated; `out_dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gp_experiment_run(config_json: *const c_char, out_dir: *const c_char) -> GpStatus {
    guard(|| {
        let cfg: ExperimentConfig = if config_json.is_null() {
            ExperimentConfig::default()
        } else {
            serde_json::from_str(as_str(config_json, "config_json")?)
                .map_err(|e| Error::InvalidArgument(format!("experiment configuration: {e}")))?
        };
        let out = PathBuf::from(as_str(out_dir, "out_dir")?);
        run_experiment(&cfg)?.write(&out)?;
        Ok(())
    })
}
