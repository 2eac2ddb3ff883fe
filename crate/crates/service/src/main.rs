use clap::Parser;

#[derive(Parser)]
#[command(name = "rtlmend-server", about = "HTTP service for the rtlmend verification and repair pipeline")]
struct Args {
    /// Address to bind, e.g. 127.0.0.1:7787. Port 0 picks an ephemeral port.
    #[arg(long, default_value = "127.0.0.1:7787")]
    bind: std::net::SocketAddr,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let addr = rtlmend_service::serve(args.bind).await?;
    println!("listening on http://{addr}");
    tokio::signal::ctrl_c().await?;
    Ok(())
}
