//! C ABI over the core solver: opaque instance handles, status codes, and
//! flat-array in/out parameters. The header is generated by cbindgen into
//! `include/peergrid.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use peergrid::equilibrium::{entity_profit, nash_closed_form};
use peergrid::error::Error;
use peergrid::linalg::Matrix;
use peergrid::net::{build_topology, CostProfile, ModelInstance, Network, Topology, UserPopulation};
use peergrid::pricing::{pigouvian_subsidies, ppd_prices, social_optimum, uniform_price_complete};
use peergrid::selection::{exact_selection_capped, heuristic_selection};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgStatus {
    PgOk = 0,
    PgNullPointer = 1,
    PgInvalidArgument = 2,
    PgAssumptionViolated = 3,
    PgNotSymmetric = 4,
    PgTooLarge = 5,
    PgConfigInvalid = 6,
    PgNumericFailure = 7,
}

/// Standard topologies accepted by `pg_instance_create`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgTopology {
    PgFullyConnected = 0,
    PgStar = 1,
    PgRing = 2,
}

/// Opaque model instance: network, user parameters, and entity costs.
pub struct PgInstance {
    inner: ModelInstance,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn status_of(err: &Error) -> PgStatus {
    match err {
        Error::AssumptionViolated { .. }
        | Error::NegativePrice { .. }
        | Error::NegativeBound { .. }
        | Error::PremiseNotMet(_)
        | Error::AlphaOutOfRange { .. } => PgStatus::PgAssumptionViolated,
        Error::NotSymmetric { .. } => PgStatus::PgNotSymmetric,
        Error::TooLarge { .. } => PgStatus::PgTooLarge,
        Error::ConfigInvalid { .. } => PgStatus::PgConfigInvalid,
        Error::SingularMatrix { .. } | Error::NoConvergence { .. } | Error::NonFiniteEntry => {
            PgStatus::PgNumericFailure
        }
        _ => PgStatus::PgInvalidArgument,
    }
}

fn fail(err: &Error) -> PgStatus {
    set_last_error(&err.to_string());
    status_of(err)
}

fn guarded(f: impl FnOnce() -> PgStatus) -> PgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            PgStatus::PgNumericFailure
        }
    }
}

/// Message for the most recent error on this thread. Valid until the next
/// failing call; never null.
#[no_mangle]
pub extern "C" fn pg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn build_instance(
    network: Network,
    n: usize,
    a: *const f64,
    b: *const f64,
    gamma: *const f64,
    c: *const f64,
) -> Result<ModelInstance, Error> {
    let a = slice::from_raw_parts(a, n).to_vec();
    let b = slice::from_raw_parts(b, n).to_vec();
    let gamma = slice::from_raw_parts(gamma, n).to_vec();
    let c = slice::from_raw_parts(c, n).to_vec();
    let population = UserPopulation::new(a, b, gamma)?;
    let cost = CostProfile::new(c)?;
    ModelInstance::new(network, population, cost)
}

fn emit_instance(result: Result<ModelInstance, Error>, out: *mut *mut PgInstance) -> PgStatus {
    match result {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(PgInstance { inner })) };
            PgStatus::PgOk
        }
        Err(e) => fail(&e),
    }
}

/// Creates an instance on a standard topology. Arrays `a`, `b`, `gamma`, `c`
/// must each hold `n` values.
///
/// # Safety
/// All pointers must be valid for `n` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pg_instance_create(
    topology: PgTopology,
    n: usize,
    a: *const f64,
    b: *const f64,
    gamma: *const f64,
    c: *const f64,
    out: *mut *mut PgInstance,
) -> PgStatus {
    if a.is_null() || b.is_null() || gamma.is_null() || c.is_null() || out.is_null() {
        set_last_error("null pointer argument");
        return PgStatus::PgNullPointer;
    }
    guarded(|| {
        let kind = match topology {
            PgTopology::PgFullyConnected => Topology::FullyConnected,
            PgTopology::PgStar => Topology::Star,
            PgTopology::PgRing => Topology::Ring,
        };
        let network = match build_topology(kind, n) {
            Ok(net) => net,
            Err(e) => return fail(&e),
        };
        emit_instance(build_instance(network, n, a, b, gamma, c), out)
    })
}

/// Creates an instance from a row-major `n x n` interaction matrix.
///
/// # Safety
/// `weights` must be valid for `n*n` reads; the other pointers for `n` reads;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pg_instance_create_custom(
    weights: *const f64,
    n: usize,
    a: *const f64,
    b: *const f64,
    gamma: *const f64,
    c: *const f64,
    out: *mut *mut PgInstance,
) -> PgStatus {
    if weights.is_null() || a.is_null() || b.is_null() || gamma.is_null() || c.is_null() || out.is_null()
    {
        set_last_error("null pointer argument");
        return PgStatus::PgNullPointer;
    }
    guarded(|| {
        let entries = slice::from_raw_parts(weights, n * n).to_vec();
        let network = match Matrix::new(n, n, entries)
            .and_then(|m| Network::from_weights(m, Topology::Custom))
        {
            Ok(net) => net,
            Err(e) => return fail(&e),
        };
        emit_instance(build_instance(network, n, a, b, gamma, c), out)
    })
}

/// Frees an instance. Passing null is a no-op.
///
/// # Safety
/// `instance` must come from a `pg_instance_create*` call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pg_instance_free(instance: *mut PgInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Number of users in the instance; 0 if `instance` is null.
///
/// # Safety
/// `instance` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pg_instance_n(instance: *const PgInstance) -> usize {
    if instance.is_null() {
        0
    } else {
        (*instance).inner.n()
    }
}

/// Nash equilibrium consumption at the given per-user prices.
///
/// # Safety
/// `prices` and `out_x` must be valid for `n` reads/writes.
#[no_mangle]
pub unsafe extern "C" fn pg_nash_equilibrium(
    instance: *const PgInstance,
    prices: *const f64,
    out_x: *mut f64,
) -> PgStatus {
    if instance.is_null() || prices.is_null() || out_x.is_null() {
        set_last_error("null pointer argument");
        return PgStatus::PgNullPointer;
    }
    guarded(|| {
        let inst = &(*instance).inner;
        let p = slice::from_raw_parts(prices, inst.n());
        match nash_closed_form(inst, p) {
            Ok(x) => {
                ptr::copy_nonoverlapping(x.x().as_ptr(), out_x, inst.n());
                PgStatus::PgOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Profit-maximizing individual prices, the resulting consumption, and the
/// entity profit. Any of the out pointers may be null to skip that output.
///
/// # Safety
/// Non-null out pointers must be valid for `n` writes (`out_profit` for one).
#[no_mangle]
pub unsafe extern "C" fn pg_ppd_prices(
    instance: *const PgInstance,
    out_prices: *mut f64,
    out_x: *mut f64,
    out_profit: *mut f64,
) -> PgStatus {
    if instance.is_null() {
        set_last_error("null pointer argument");
        return PgStatus::PgNullPointer;
    }
    guarded(|| {
        let inst = &(*instance).inner;
        let p = match ppd_prices(inst) {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        let x = match nash_closed_form(inst, &p.prices) {
            Ok(x) => x,
            Err(e) => return fail(&e),
        };
        if !out_prices.is_null() {
            ptr::copy_nonoverlapping(p.prices.as_ptr(), out_prices, inst.n());
        }
        if !out_x.is_null() {
            ptr::copy_nonoverlapping(x.x().as_ptr(), out_x, inst.n());
        }
        if !out_profit.is_null() {
            *out_profit = entity_profit(&x, &p.prices, inst.cost());
        }
        PgStatus::PgOk
    })
}

/// Profit-maximizing single price under complete information.
///
/// # Safety
/// Non-null out pointers must be valid for one write (`out_x` for `n`).
#[no_mangle]
pub unsafe extern "C" fn pg_uniform_price(
    instance: *const PgInstance,
    out_price: *mut f64,
    out_x: *mut f64,
    out_profit: *mut f64,
) -> PgStatus {
    if instance.is_null() {
        set_last_error("null pointer argument");
        return PgStatus::PgNullPointer;
    }
    guarded(|| {
        let inst = &(*instance).inner;
        let price = match uniform_price_complete(inst) {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        let prices = vec![price; inst.n()];
        let x = match nash_closed_form(inst, &prices) {
            Ok(x) => x,
            Err(e) => return fail(&e),
        };
        if !out_price.is_null() {
            *out_price = price;
        }
        if !out_x.is_null() {
            ptr::copy_nonoverlapping(x.x().as_ptr(), out_x, inst.n());
        }
        if !out_profit.is_null() {
            *out_profit = entity_profit(&x, &prices, inst.cost());
        }
        PgStatus::PgOk
    })
}

/// Socially optimal consumption and the per-user subsidies that restore it.
///
/// # Safety
/// Non-null out pointers must be valid for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn pg_social_optimum(
    instance: *const PgInstance,
    out_x: *mut f64,
    out_subsidies: *mut f64,
) -> PgStatus {
    if instance.is_null() {
        set_last_error("null pointer argument");
        return PgStatus::PgNullPointer;
    }
    guarded(|| {
        let inst = &(*instance).inner;
        let x = match social_optimum(inst) {
            Ok(x) => x,
            Err(e) => return fail(&e),
        };
        if !out_x.is_null() {
            ptr::copy_nonoverlapping(x.x().as_ptr(), out_x, inst.n());
        }
        if !out_subsidies.is_null() {
            let s = pigouvian_subsidies(inst, &x);
            ptr::copy_nonoverlapping(s.as_ptr(), out_subsidies, inst.n());
        }
        PgStatus::PgOk
    })
}

/// Exhaustive best size-`m` treatment at a uniform `price`. `out_flags[i]` is
/// 1 when user `i` is treated.
///
/// # Safety
/// `out_flags` must be valid for `n` writes; `out_profit` for one.
#[no_mangle]
pub unsafe extern "C" fn pg_exact_selection(
    instance: *const PgInstance,
    price: f64,
    m: usize,
    cap: u64,
    out_flags: *mut u8,
    out_profit: *mut f64,
) -> PgStatus {
    if instance.is_null() || out_flags.is_null() {
        set_last_error("null pointer argument");
        return PgStatus::PgNullPointer;
    }
    guarded(|| {
        let inst = &(*instance).inner;
        match exact_selection_capped(inst, price, m, cap) {
            Ok(outcome) => {
                for (i, flag) in outcome.assignment.flags().iter().enumerate() {
                    *out_flags.add(i) = *flag as u8;
                }
                if !out_profit.is_null() {
                    *out_profit = outcome.profit;
                }
                PgStatus::PgOk
            }
            Err(e) => fail(&e),
        }
    })
}

/// Deviation-ranking heuristic counterpart of `pg_exact_selection`.
///
/// # Safety
/// `out_flags` must be valid for `n` writes; `out_profit` for one.
#[no_mangle]
pub unsafe extern "C" fn pg_heuristic_selection(
    instance: *const PgInstance,
    price: f64,
    m: usize,
    expected_consumption: f64,
    out_flags: *mut u8,
    out_profit: *mut f64,
) -> PgStatus {
    if instance.is_null() || out_flags.is_null() {
        set_last_error("null pointer argument");
        return PgStatus::PgNullPointer;
    }
    guarded(|| {
        let inst = &(*instance).inner;
        match heuristic_selection(inst, price, m, expected_consumption) {
            Ok(outcome) => {
                for (i, flag) in outcome.assignment.flags().iter().enumerate() {
                    *out_flags.add(i) = *flag as u8;
                }
                if !out_profit.is_null() {
                    *out_profit = outcome.profit;
                }
                PgStatus::PgOk
            }
            Err(e) => fail(&e),
        }
    })
}
