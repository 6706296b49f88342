use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    if let Ok(v) = std::env::var(flarekit::THREADS_ENV) {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("cannot configure thread pool: {e}");
                }
            }
            _ => {
                eprintln!("error: {} must be a positive integer, got `{v}`", flarekit::THREADS_ENV);
                return ExitCode::from(2);
            }
        }
    }
    ExitCode::from(flarekit::run(std::env::args_os()))
}
