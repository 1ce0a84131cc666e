//! C interface to the `hqrl` crate.
//!
//! Every fallible function returns an [`HqrlStatus`]; on failure a message
//! is kept per thread and read with [`hqrl_last_error_message`]. Objects are
//! opaque handles created by `*_new` functions and released with the
//! matching `*_free`. Panics never cross the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hqrl::envs::{Action, Env, EnvId};
use hqrl::experiment::ExperimentConfig;
use hqrl::hybrid::{HybridNet, HybridNetConfig, OutputSpec};
use hqrl::ppo::{evaluate_policy, Trainer};
use hqrl::quantum::{Backend, BackendMode};
use hqrl::tables::{reference_actors, verify_tables};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HqrlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Config = 4,
    Environment = 5,
    Training = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HqrlOutputKind {
    Discrete = 0,
    ContinuousBeta = 1,
    Value = 2,
}

/// Outcome of one environment step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HqrlStep {
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

pub struct HqrlNetwork {
    net: HybridNet,
    backend: Backend,
}

pub struct HqrlEnv {
    env: Env,
}

pub struct HqrlTrainer {
    trainer: Trainer,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("interior NULs were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

struct Failure(HqrlStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail<T>(status: HqrlStatus, message: impl Into<String>) -> FfiResult<T> {
    Err(Failure(status, message.into()))
}

fn guard(body: impl FnOnce() -> FfiResult<()>) -> HqrlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => HqrlStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let what = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {what}"));
            HqrlStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T) -> FfiResult<&'a T> {
    p.as_ref().map_or_else(|| fail(HqrlStatus::NullPointer, "null handle"), Ok)
}

unsafe fn as_mut<'a, T>(p: *mut T) -> FfiResult<&'a mut T> {
    p.as_mut().map_or_else(|| fail(HqrlStatus::NullPointer, "null handle"), Ok)
}

unsafe fn as_str<'a>(p: *const c_char) -> FfiResult<&'a str> {
    if p.is_null() {
        return fail(HqrlStatus::NullPointer, "null string");
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(HqrlStatus::InvalidUtf8, "string is not UTF-8"))
}

unsafe fn in_slice<'a>(p: *const f64, len: usize) -> FfiResult<&'a [f64]> {
    match (p.is_null(), len) {
        (_, 0) => Ok(&[]),
        (true, _) => fail(HqrlStatus::NullPointer, "null input buffer"),
        (false, _) => Ok(std::slice::from_raw_parts(p, len)),
    }
}

unsafe fn write_out(values: &[f64], out: *mut f64, capacity: usize) -> FfiResult<()> {
    if values.len() > capacity {
        return fail(
            HqrlStatus::BufferTooSmall,
            format!("output needs {} values, buffer holds {capacity}", values.len()),
        );
    }
    if !values.is_empty() {
        if out.is_null() {
            return fail(HqrlStatus::NullPointer, "null output buffer");
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    }
    Ok(())
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return fail(HqrlStatus::NullPointer, "null output handle");
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn hqrl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hqrl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn hqrl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a hybrid network with constant initialisers, pre-encoding when
/// `state_dim != n_qubits`, and exact execution.
#[no_mangle]
pub unsafe extern "C" fn hqrl_network_new(
    n_qubits: usize,
    n_layers: usize,
    state_dim: usize,
    kind: HqrlOutputKind,
    output_size: usize,
    seed: u64,
    out: *mut *mut HqrlNetwork,
) -> HqrlStatus {
    guard(|| {
        let output = match kind {
            HqrlOutputKind::Discrete => OutputSpec::Discrete(output_size),
            HqrlOutputKind::ContinuousBeta => OutputSpec::ContinuousBeta(output_size),
            HqrlOutputKind::Value => OutputSpec::Value,
        };
        let config = HybridNetConfig::new(n_qubits, n_layers, state_dim, output);
        network_from_config(config, seed, out)
    })
}

/// Builds a hybrid network from its JSON configuration.
#[no_mangle]
pub unsafe extern "C" fn hqrl_network_from_json(
    config_json: *const c_char,
    seed: u64,
    out: *mut *mut HqrlNetwork,
) -> HqrlStatus {
    guard(|| {
        let config: HybridNetConfig = serde_json::from_str(as_str(config_json)?)
            .or_else(|e| fail(HqrlStatus::Config, e.to_string()))?;
        network_from_config(config, seed, out)
    })
}

unsafe fn network_from_config(config: HybridNetConfig, seed: u64, out: *mut *mut HqrlNetwork) -> FfiResult<()> {
    let backend = Backend::new(config.backend.reseeded(seed)).or_else(|e| fail(HqrlStatus::Config, e.to_string()))?;
    let net = HybridNet::new(config, &mut ChaCha8Rng::seed_from_u64(seed))
        .or_else(|e| fail(HqrlStatus::Config, e.to_string()))?;
    store(out, HqrlNetwork { net, backend })
}

#[no_mangle]
pub unsafe extern "C" fn hqrl_network_free(net: *mut HqrlNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Writes the quantum and total trainable parameter counts.
#[no_mangle]
pub unsafe extern "C" fn hqrl_network_param_counts(
    net: *const HqrlNetwork,
    quantum: *mut usize,
    total: *mut usize,
) -> HqrlStatus {
    guard(|| {
        let (q, t) = as_ref(net)?.net.count_parameters();
        *as_mut(quantum)? = q;
        *as_mut(total)? = t;
        Ok(())
    })
}

/// Width of one row of raw outputs.
#[no_mangle]
pub unsafe extern "C" fn hqrl_network_output_width(net: *const HqrlNetwork, width: *mut usize) -> HqrlStatus {
    guard(|| {
        *as_mut(width)? = as_ref(net)?.net.output_spec().raw_width();
        Ok(())
    })
}

/// Raw outputs for `n_rows` row-major states of `state_dim` values each;
/// `out` receives `n_rows * output_width` values.
#[no_mangle]
pub unsafe extern "C" fn hqrl_network_forward(
    net: *mut HqrlNetwork,
    states: *const f64,
    n_rows: usize,
    state_dim: usize,
    out: *mut f64,
    out_len: usize,
) -> HqrlStatus {
    guard(|| {
        let h = as_mut(net)?;
        if state_dim != h.net.config().state_dim {
            return fail(
                HqrlStatus::InvalidArgument,
                format!("state_dim {state_dim}, network expects {}", h.net.config().state_dim),
            );
        }
        let flat = in_slice(states, n_rows * state_dim)?;
        let rows: Vec<Vec<f64>> = flat.chunks(state_dim.max(1)).map(<[f64]>::to_vec).collect();
        let (raw, _) = h
            .net
            .forward_raw(&rows, &mut h.backend)
            .or_else(|e| fail(HqrlStatus::InvalidArgument, e.to_string()))?;
        write_out(&raw.concat(), out, out_len)
    })
}

/// Gradient of `sum(d_out * outputs)` over the rows with respect to every
/// trainable parameter; `grad` receives `total` values.
#[no_mangle]
pub unsafe extern "C" fn hqrl_network_backward(
    net: *mut HqrlNetwork,
    states: *const f64,
    n_rows: usize,
    state_dim: usize,
    d_out: *const f64,
    grad: *mut f64,
    grad_len: usize,
) -> HqrlStatus {
    guard(|| {
        let h = as_mut(net)?;
        if state_dim != h.net.config().state_dim {
            return fail(HqrlStatus::InvalidArgument, "state_dim does not match the network");
        }
        let width = h.net.output_spec().raw_width();
        let rows: Vec<Vec<f64>> = in_slice(states, n_rows * state_dim)?
            .chunks(state_dim.max(1))
            .map(<[f64]>::to_vec)
            .collect();
        let d: Vec<Vec<f64>> = in_slice(d_out, n_rows * width)?.chunks(width).map(<[f64]>::to_vec).collect();
        let invalid = |e: hqrl::hybrid::HybridError| Failure(HqrlStatus::InvalidArgument, e.to_string());
        let (_, tape) = h.net.forward_raw(&rows, &mut h.backend).map_err(invalid)?;
        let g = h.net.backward(&tape, &d, &mut h.backend).map_err(invalid)?;
        write_out(&g, grad, grad_len)
    })
}

/// Copies the flat parameter vector.
#[no_mangle]
pub unsafe extern "C" fn hqrl_network_get_params(net: *const HqrlNetwork, out: *mut f64, out_len: usize) -> HqrlStatus {
    guard(|| write_out(&as_ref(net)?.net.params(), out, out_len))
}

/// Replaces the flat parameter vector.
#[no_mangle]
pub unsafe extern "C" fn hqrl_network_set_params(net: *mut HqrlNetwork, params: *const f64, len: usize) -> HqrlStatus {
    guard(|| {
        let h = as_mut(net)?;
        let p = in_slice(params, len)?;
        h.net
            .set_params(p)
            .or_else(|e| fail(HqrlStatus::InvalidArgument, e.to_string()))
    })
}

/// Switches the execution mode, parsed from `exact`, `shots:N[:SEED]` or
/// `noisy:N:P:R[:SEED]`.
#[no_mangle]
pub unsafe extern "C" fn hqrl_network_set_backend(net: *mut HqrlNetwork, mode: *const c_char) -> HqrlStatus {
    guard(|| {
        let h = as_mut(net)?;
        let mode: BackendMode = as_str(mode)?
            .parse()
            .or_else(|e: hqrl::quantum::QuantumError| fail(HqrlStatus::InvalidArgument, e.to_string()))?;
        h.backend = Backend::new(mode).or_else(|e| fail(HqrlStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Creates an environment from its id, e.g. `"CartPole-v1"`.
#[no_mangle]
pub unsafe extern "C" fn hqrl_env_new(id: *const c_char, out: *mut *mut HqrlEnv) -> HqrlStatus {
    guard(|| {
        let id: EnvId = as_str(id)?
            .parse()
            .or_else(|e: hqrl::envs::EnvError| fail(HqrlStatus::Environment, e.to_string()))?;
        let env = Env::new(id).or_else(|e| fail(HqrlStatus::Environment, e.to_string()))?;
        store(out, HqrlEnv { env })
    })
}

#[no_mangle]
pub unsafe extern "C" fn hqrl_env_free(env: *mut HqrlEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Observation width; for discrete spaces `action_dim` is the number of
/// actions, for boxes the action vector length.
#[no_mangle]
pub unsafe extern "C" fn hqrl_env_dims(
    env: *const HqrlEnv,
    state_dim: *mut usize,
    action_dim: *mut usize,
    discrete: *mut bool,
) -> HqrlStatus {
    guard(|| {
        let spec = as_ref(env)?.env.spec();
        *as_mut(state_dim)? = spec.state_dim;
        let (dim, is_discrete) = match &spec.action_space {
            hqrl::envs::ActionSpace::Discrete(k) => (*k, true),
            hqrl::envs::ActionSpace::Box { low, .. } => (low.len(), false),
        };
        *as_mut(action_dim)? = dim;
        *as_mut(discrete)? = is_discrete;
        Ok(())
    })
}

/// Starts an episode from `seed` and writes the first observation.
#[no_mangle]
pub unsafe extern "C" fn hqrl_env_reset(env: *mut HqrlEnv, seed: u64, obs: *mut f64, obs_len: usize) -> HqrlStatus {
    guard(|| {
        let e = as_mut(env)?;
        let first = e.env.reset(Some(seed));
        write_out(&first, obs, obs_len)
    })
}

unsafe fn step(env: *mut HqrlEnv, action: Action, obs: *mut f64, obs_len: usize, result: *mut HqrlStep) -> FfiResult<()> {
    let e = as_mut(env)?;
    let r = e
        .env
        .step(&action)
        .or_else(|err| fail(HqrlStatus::Environment, err.to_string()))?;
    write_out(&r.next_state, obs, obs_len)?;
    *as_mut(result)? = HqrlStep {
        reward: r.reward,
        terminated: r.terminated,
        truncated: r.truncated,
    };
    Ok(())
}

#[no_mangle]
pub unsafe extern "C" fn hqrl_env_step_discrete(
    env: *mut HqrlEnv,
    action: usize,
    obs: *mut f64,
    obs_len: usize,
    result: *mut HqrlStep,
) -> HqrlStatus {
    guard(|| step(env, Action::Discrete(action), obs, obs_len, result))
}

#[no_mangle]
pub unsafe extern "C" fn hqrl_env_step_continuous(
    env: *mut HqrlEnv,
    action: *const f64,
    action_len: usize,
    obs: *mut f64,
    obs_len: usize,
    result: *mut HqrlStep,
) -> HqrlStatus {
    guard(|| {
        let a = in_slice(action, action_len)?.to_vec();
        step(env, Action::Continuous(a), obs, obs_len, result)
    })
}

/// Creates a trainer from experiment TOML (file contents, not a path).
#[no_mangle]
pub unsafe extern "C" fn hqrl_trainer_new(config_toml: *const c_char, seed: u64, out: *mut *mut HqrlTrainer) -> HqrlStatus {
    guard(|| {
        let config = ExperimentConfig::from_toml(as_str(config_toml)?)
            .or_else(|e| fail(HqrlStatus::Config, e.to_string()))?;
        config.validate().or_else(|e| fail(HqrlStatus::Config, e.to_string()))?;
        let trainer = config
            .trainer(seed)
            .or_else(|e| fail(HqrlStatus::Config, e.to_string()))?;
        store(out, HqrlTrainer { trainer })
    })
}

/// Restores a trainer from checkpoint JSON.
#[no_mangle]
pub unsafe extern "C" fn hqrl_trainer_from_checkpoint(json: *const c_char, out: *mut *mut HqrlTrainer) -> HqrlStatus {
    guard(|| {
        let ck = hqrl::ppo::TrainerCheckpoint::from_json(as_str(json)?)
            .or_else(|e| fail(HqrlStatus::Config, e.to_string()))?;
        let trainer = Trainer::from_checkpoint(ck).or_else(|e| fail(HqrlStatus::Config, e.to_string()))?;
        store(out, HqrlTrainer { trainer })
    })
}

#[no_mangle]
pub unsafe extern "C" fn hqrl_trainer_free(trainer: *mut HqrlTrainer) {
    if !trainer.is_null() {
        drop(Box::from_raw(trainer));
    }
}

/// Runs one collect/update iteration and reports the curve row's mean
/// return (NaN until an episode has finished) and total environment steps.
#[no_mangle]
pub unsafe extern "C" fn hqrl_trainer_run_iteration(
    trainer: *mut HqrlTrainer,
    return_mean: *mut f64,
    env_steps: *mut usize,
) -> HqrlStatus {
    guard(|| {
        let t = as_mut(trainer)?;
        let row = t
            .trainer
            .run_iteration()
            .or_else(|e| fail(HqrlStatus::Training, e.to_string()))?;
        if !return_mean.is_null() {
            *return_mean = row.return_mean;
        }
        if !env_steps.is_null() {
            *env_steps = row.env_steps;
        }
        Ok(())
    })
}

/// Checkpoint JSON; release it with [`hqrl_string_free`].
#[no_mangle]
pub unsafe extern "C" fn hqrl_trainer_checkpoint(trainer: *const HqrlTrainer, json: *mut *mut c_char) -> HqrlStatus {
    guard(|| {
        let text = as_ref(trainer)?.trainer.checkpoint().to_json();
        let s = CString::new(text).or_else(|_| fail(HqrlStatus::Training, "checkpoint contains NUL"))?;
        *as_mut(json)? = s.into_raw();
        Ok(())
    })
}

/// Mean return of the current policy over `episodes` episodes on the
/// training environment, seeded from `seed`, with exact execution.
#[no_mangle]
pub unsafe extern "C" fn hqrl_trainer_evaluate(
    trainer: *const HqrlTrainer,
    episodes: usize,
    seed: u64,
    deterministic: bool,
    mean: *mut f64,
) -> HqrlStatus {
    guard(|| {
        let t = &as_ref(trainer)?.trainer;
        if episodes == 0 {
            return fail(HqrlStatus::InvalidArgument, "episodes must be positive");
        }
        let stats = evaluate_policy(t.agent(), t.env_id(), episodes, &mut Backend::exact(), seed, deterministic)
            .or_else(|e| fail(HqrlStatus::Training, e.to_string()))?;
        *as_mut(mean)? = stats.mean;
        Ok(())
    })
}

/// Builds the reference actor networks and writes how many match their
/// expected parameter counts; returns `Config` unless all do.
#[no_mangle]
pub unsafe extern "C" fn hqrl_verify_tables(passed: *mut usize, total: *mut usize) -> HqrlStatus {
    guard(|| {
        let report = verify_tables(&reference_actors());
        let ok = report.rows.iter().filter(|r| r.passed()).count();
        *as_mut(passed)? = ok;
        *as_mut(total)? = report.rows.len();
        if report.all_passed() {
            Ok(())
        } else {
            fail(HqrlStatus::Config, format!("{report}"))
        }
    })
}
