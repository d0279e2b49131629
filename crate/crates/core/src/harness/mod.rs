pub mod estimate;
pub mod experiment;
pub mod reports;
pub mod seeding;
pub mod stats;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "TRI_ISING_THREADS";

/// Sizes the global worker pool from `threads`, or from [`THREADS_ENV`] when
/// `None`. Has no effect once the pool exists. Results do not depend on it.
pub fn init_threads(threads: Option<usize>) -> crate::Result<usize> {
    let n = match threads {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(s) => {
                Some(s.trim().parse().map_err(|_| crate::Error::InvalidParameter(format!("{THREADS_ENV}={s} is not a thread count")))?)
            }
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("thread pool already initialised: {e}");
        }
    }
    Ok(rayon::current_num_threads())
}
