use std::process::ExitCode;

use tracing_subscriber::EnvFilter;
use tutorflow_server::{router, App, Hooks, ServerConfig};

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();

    let config = match ServerConfig::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    let bind = config.bind_addr;
    let app = match App::open(config, Hooks::default()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("startup failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    let listener = match tokio::net::TcpListener::bind(bind).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("cannot bind {bind}: {e}");
            return ExitCode::FAILURE;
        }
    };
    // tests and scripts wait for this line
    println!("listening on {}", listener.local_addr().expect("bound socket has an address"));
    tracing::info!(mode = ?app.gateway.mode(), storage = %app.config.storage_path.display(), "tutorflow-server started");

    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if let Err(e) = axum::serve(listener, router(app)).with_graceful_shutdown(shutdown).await {
        eprintln!("server error: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
