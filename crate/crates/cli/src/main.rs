use clap::Parser;

fn main() -> anyhow::Result<()> {
    let cli = axppo_cli::Cli::parse();
    axppo_cli::run(cli.command.into())
}
