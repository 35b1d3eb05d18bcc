use clap::Parser;

use isgp_cli::{Cli, Command};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(args) => isgp_cli::commands::generate(&args),
        Command::Run(args) => isgp_cli::commands::run(&args).map(|_| ()),
        Command::Report(args) => isgp_cli::commands::report(&args),
        Command::Session(args) => {
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(isgp_cli::server::serve(&args))
        }
    }
}
