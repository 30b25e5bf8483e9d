use std::net::SocketAddr;

use clap::Parser;

#[derive(Parser)]
#[command(name = "topoprep-service", version, about = "Serve the topoprep experiments over HTTP/JSON")]
struct Args {
    /// address to listen on
    #[arg(long, default_value = "127.0.0.1:8787")]
    bind: SocketAddr,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let listener = tokio::net::TcpListener::bind(args.bind).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    topoprep_service::serve(listener).await?;
    Ok(())
}
