use std::net::SocketAddr;
use std::sync::Arc;

use hyper::server::conn::http1;
use hyper::service::service_fn;
use hyper_util::rt::TokioIo;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::task::JoinHandle;

use crate::agent::Agent;
use crate::api;
use crate::config::{Config, ConfigError};
use crate::proxy::{handle, upstream_client};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
}

/// Both listeners, running on the current tokio runtime.
pub struct Running {
    pub agent: Arc<Agent>,
    pub proxy_addr: SocketAddr,
    pub control_addr: SocketAddr,
    shutdown: watch::Sender<bool>,
    tasks: Vec<JoinHandle<()>>,
}

impl Running {
    /// Stops accepting connections and waits for the accept loops to end.
    pub async fn shutdown(self) {
        let _ = self.shutdown.send(true);
        for t in self.tasks {
            let _ = t.await;
        }
    }
}

async fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })
}

/// Loads the config and starts the proxy and control listeners.
pub async fn start(config: Config) -> Result<Running, ServeError> {
    let proxy = bind(config.proxy_addr).await?;
    let control = bind(config.control_addr).await?;
    let agent = Agent::new(config)?;
    start_with(agent, proxy, control).await
}

pub async fn start_with(
    agent: Arc<Agent>,
    proxy: TcpListener,
    control: TcpListener,
) -> Result<Running, ServeError> {
    let proxy_addr = proxy.local_addr().map_err(|source| ServeError::Bind {
        addr: agent.config().proxy_addr,
        source,
    })?;
    let control_addr = control.local_addr().map_err(|source| ServeError::Bind {
        addr: agent.config().control_addr,
        source,
    })?;
    let (tx, rx) = watch::channel(false);

    let proxy_task = tokio::spawn(proxy_loop(agent.clone(), proxy, rx.clone()));
    let app = api::router(agent.clone()).into_make_service_with_connect_info::<SocketAddr>();
    let mut stop = rx;
    let control_task = tokio::spawn(async move {
        let graceful = async move {
            let _ = stop.wait_for(|s| *s).await;
        };
        if let Err(e) = axum::serve(control, app).with_graceful_shutdown(graceful).await {
            tracing::error!(error = %e, "control API stopped");
        }
    });
    tracing::info!(%proxy_addr, %control_addr, "agent listening");
    Ok(Running {
        agent,
        proxy_addr,
        control_addr,
        shutdown: tx,
        tasks: vec![proxy_task, control_task],
    })
}

async fn proxy_loop(agent: Arc<Agent>, listener: TcpListener, mut stop: watch::Receiver<bool>) {
    let client = upstream_client();
    loop {
        let (stream, peer) = tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok(a) => a,
                Err(e) => {
                    tracing::warn!(error = %e, "accept failed");
                    continue;
                }
            },
            _ = stop.wait_for(|s| *s) => return,
        };
        let agent = agent.clone();
        let client = client.clone();
        tokio::spawn(async move {
            let service = service_fn(move |req| handle(agent.clone(), client.clone(), req));
            let conn = http1::Builder::new()
                .preserve_header_case(true)
                .title_case_headers(true)
                .serve_connection(TokioIo::new(stream), service)
                .with_upgrades();
            if let Err(e) = conn.await {
                tracing::debug!(%peer, error = %e, "proxy connection ended");
            }
        });
    }
}

/// Runs until interrupted.
pub async fn run(config: Config) -> Result<(), ServeError> {
    let running = start(config).await?;
    eprintln!(
        "proxy on {}, control API on http://{}",
        running.proxy_addr, running.control_addr
    );
    let _ = tokio::signal::ctrl_c().await;
    running.shutdown().await;
    Ok(())
}
