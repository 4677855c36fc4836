//! C ABI for llp-core.
//!
//! Objects are opaque handles created by `*_new`/`*_generate` functions and
//! released with the matching `*_free`. Every fallible function returns an
//! [`LlpStatus`]; on failure a description is available from
//! [`llp_last_error_message`] on the same thread. Output values are written
//! through pointer arguments and are left untouched on failure.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use llp_core::decoder::{select_from_scores, train_llp, LinearClassifier, OnlineLlpState};
use llp_core::eval::auc;
use llp_core::mixing::{noise_amplification, pseudoinverse, MixingMatrix};
use llp_core::sequence::{assemble_trial, SymbolGrid, Trial, TrialDesign};
use llp_core::{Label, LlpError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LlpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidMixing = 3,
    Singular = 4,
    InsufficientData = 5,
    DimensionMismatch = 6,
    GenerationFailed = 7,
    NoConvergence = 8,
    Parse = 9,
    Io = 10,
    /// The call panicked; the handle it touched should be freed.
    Panic = 11,
}

impl From<&LlpError> for LlpStatus {
    fn from(e: &LlpError) -> Self {
        match e {
            LlpError::InvalidMixing(_) => Self::InvalidMixing,
            LlpError::Singular(_) => Self::Singular,
            LlpError::InsufficientData(_) => Self::InsufficientData,
            LlpError::DimensionMismatch { .. } => Self::DimensionMismatch,
            LlpError::InvalidArgument(_) => Self::InvalidArgument,
            LlpError::GenerationFailed(_) => Self::GenerationFailed,
            LlpError::NoConvergence(_) => Self::NoConvergence,
            LlpError::Parse { .. } => Self::Parse,
            LlpError::Io(_) => Self::Io,
        }
    }
}

/// Mixing matrix with one row of target / non-target proportions per group.
pub struct LlpMixing {
    inner: MixingMatrix,
}

/// Online label-proportion decoder: running statistics plus the latest classifier.
pub struct LlpDecoder {
    state: OnlineLlpState,
    mixing: MixingMatrix,
    classifier: Option<LinearClassifier>,
}

/// One speller trial of 68 stimuli on the default 6 × 7 grid.
pub struct LlpTrial {
    trial: Trial,
    grid: SymbolGrid,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(LlpStatus);

impl From<LlpError> for Fail {
    fn from(e: LlpError) -> Self {
        set_error(e.to_string());
        Fail(LlpStatus::from(&e))
    }
}

fn null(what: &str) -> Fail {
    set_error(format!("{what} is null"));
    Fail(LlpStatus::NullPointer)
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> LlpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LlpStatus::Ok,
        Ok(Err(Fail(s))) => s,
        Err(_) => {
            set_error("panic inside llp".into());
            LlpStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or null.
/// The pointer stays valid until the next failing call on the thread.
#[no_mangle]
pub extern "C" fn llp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a mixing matrix from `groups` rows of two proportions, row-major.
#[no_mangle]
pub unsafe extern "C" fn llp_mixing_new(rows: *const f64, groups: usize, out: *mut *mut LlpMixing) -> LlpStatus {
    guard(|| {
        let flat = slice(rows, groups * 2, "rows")?;
        let m = MixingMatrix::try_new(flat.chunks_exact(2).map(|r| [r[0], r[1]]).collect())?;
        put(out, Box::into_raw(Box::new(LlpMixing { inner: m })), "out")
    })
}

/// The two-group speller matrix `[[3/8, 5/8], [2/18, 16/18]]`.
#[no_mangle]
pub unsafe extern "C" fn llp_mixing_speller(out: *mut *mut LlpMixing) -> LlpStatus {
    guard(|| put(out, Box::into_raw(Box::new(LlpMixing { inner: MixingMatrix::speller() })), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn llp_mixing_free(m: *mut LlpMixing) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

#[no_mangle]
pub unsafe extern "C" fn llp_mixing_groups(m: *const LlpMixing) -> usize {
    m.as_ref().map_or(0, |m| m.inner.groups())
}

/// Noise amplification factor.
#[no_mangle]
pub unsafe extern "C" fn llp_mixing_naf(m: *const LlpMixing, out: *mut f64) -> LlpStatus {
    guard(|| {
        let naf = noise_amplification(&handle(m, "mixing")?.inner)?;
        put(out, naf, "out")
    })
}

/// Reconstruction coefficients; `plus` and `minus` hold `len` = groups values each.
#[no_mangle]
pub unsafe extern "C" fn llp_mixing_pseudoinverse(
    m: *const LlpMixing,
    plus: *mut f64,
    minus: *mut f64,
    len: usize,
) -> LlpStatus {
    guard(|| {
        let m = &handle(m, "mixing")?.inner;
        if len != m.groups() {
            return Err(LlpError::DimensionMismatch { expected: m.groups(), got: len }.into());
        }
        let nu = pseudoinverse(m)?;
        slice_mut(plus, len, "plus")?.copy_from_slice(&nu.plus);
        slice_mut(minus, len, "minus")?.copy_from_slice(&nu.minus);
        Ok(())
    })
}

/// Empty decoder for `dim` features; the mixing matrix is copied.
#[no_mangle]
pub unsafe extern "C" fn llp_decoder_new(dim: usize, mixing: *const LlpMixing, out: *mut *mut LlpDecoder) -> LlpStatus {
    guard(|| {
        if dim == 0 {
            return Err(LlpError::InvalidArgument("dimension must be positive".into()).into());
        }
        let mixing = handle(mixing, "mixing")?.inner.clone();
        let state = OnlineLlpState::new(dim, mixing.groups());
        put(out, Box::into_raw(Box::new(LlpDecoder { state, mixing, classifier: None })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn llp_decoder_free(d: *mut LlpDecoder) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Adds one epoch of zero-based `group`.
#[no_mangle]
pub unsafe extern "C" fn llp_decoder_update(d: *mut LlpDecoder, x: *const f64, dim: usize, group: usize) -> LlpStatus {
    guard(|| {
        let d = handle_mut(d, "decoder")?;
        d.state.update(slice(x, dim, "x")?, group)?;
        Ok(())
    })
}

/// Retrains the classifier from everything seen so far.
#[no_mangle]
pub unsafe extern "C" fn llp_decoder_train(d: *mut LlpDecoder) -> LlpStatus {
    guard(|| {
        let d = handle_mut(d, "decoder")?;
        d.classifier = Some(train_llp(&d.state, &d.mixing)?);
        Ok(())
    })
}

fn trained(d: &LlpDecoder) -> Result<&LinearClassifier, Fail> {
    d.classifier.as_ref().ok_or_else(|| LlpError::InsufficientData("decoder has not been trained".into()).into())
}

/// `wᵀx` with the latest classifier.
#[no_mangle]
pub unsafe extern "C" fn llp_decoder_score(
    d: *const LlpDecoder,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> LlpStatus {
    guard(|| {
        let c = trained(handle(d, "decoder")?)?;
        let s = c.score(slice(x, dim, "x")?)?;
        put(out, s, "out")
    })
}

/// Copies the weight vector into `out` (`dim` values).
#[no_mangle]
pub unsafe extern "C" fn llp_decoder_weights(d: *const LlpDecoder, out: *mut f64, dim: usize) -> LlpStatus {
    guard(|| {
        let c = trained(handle(d, "decoder")?)?;
        if dim != c.d {
            return Err(LlpError::DimensionMismatch { expected: c.d, got: dim }.into());
        }
        slice_mut(out, dim, "out")?.copy_from_slice(&c.w);
        Ok(())
    })
}

/// Epochs absorbed since creation or the last reset.
#[no_mangle]
pub unsafe extern "C" fn llp_decoder_count(d: *const LlpDecoder) -> usize {
    d.as_ref().map_or(0, |d| d.state.count())
}

/// Forgets all statistics and the classifier.
#[no_mangle]
pub unsafe extern "C" fn llp_decoder_reset(d: *mut LlpDecoder) -> LlpStatus {
    guard(|| {
        let d = handle_mut(d, "decoder")?;
        d.state.reset();
        d.classifier = None;
        Ok(())
    })
}

/// Generates a speller trial from `seed`.
#[no_mangle]
pub unsafe extern "C" fn llp_trial_generate(seed: u64, out: *mut *mut LlpTrial) -> LlpStatus {
    guard(|| {
        let grid = SymbolGrid::speller();
        let trial = assemble_trial(&grid, &TrialDesign::speller(), seed)?;
        put(out, Box::into_raw(Box::new(LlpTrial { trial, grid })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn llp_trial_free(t: *mut LlpTrial) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of stimuli.
#[no_mangle]
pub unsafe extern "C" fn llp_trial_len(t: *const LlpTrial) -> usize {
    t.as_ref().map_or(0, |t| t.trial.len())
}

/// Highlighted cell ids and zero-based group of stimulus `index`.
/// `ids` must hold `cap` values; the count written goes to `len_out`.
#[no_mangle]
pub unsafe extern "C" fn llp_trial_stimulus(
    t: *const LlpTrial,
    index: usize,
    ids: *mut usize,
    cap: usize,
    len_out: *mut usize,
    group_out: *mut usize,
) -> LlpStatus {
    guard(|| {
        let t = handle(t, "trial")?;
        let s =
            t.trial.stimuli.get(index).ok_or_else(|| {
                Fail::from(LlpError::InvalidArgument(format!("stimulus {index} of {}", t.trial.len())))
            })?;
        let cells = &s.stimulus.0;
        if cap < cells.len() {
            return Err(LlpError::DimensionMismatch { expected: cells.len(), got: cap }.into());
        }
        slice_mut(ids, cells.len(), "ids")?.copy_from_slice(cells);
        put(len_out, cells.len(), "len_out")?;
        put(group_out, s.group, "group_out")
    })
}

/// Selected symbol for one score per stimulus.
#[no_mangle]
pub unsafe extern "C" fn llp_trial_select(
    t: *const LlpTrial,
    scores: *const f64,
    n: usize,
    out: *mut usize,
) -> LlpStatus {
    guard(|| {
        let t = handle(t, "trial")?;
        let s = select_from_scores(&t.trial, &t.grid, slice(scores, n, "scores")?)?;
        put(out, s, "out")
    })
}

/// Mann-Whitney AUC; labels are +1 (target) or -1 (non-target).
#[no_mangle]
pub unsafe extern "C" fn llp_auc(scores: *const f64, labels: *const i32, n: usize, out: *mut f64) -> LlpStatus {
    guard(|| {
        let scores = slice(scores, n, "scores")?;
        let labels = slice(labels, n, "labels")?
            .iter()
            .map(|&l| match l {
                1 => Ok(Label::Target),
                -1 => Ok(Label::NonTarget),
                other => Err(Fail::from(LlpError::InvalidArgument(format!("label {other} is not ±1")))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        put(out, auc(scores, &labels)?, "out")
    })
}
