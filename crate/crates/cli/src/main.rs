use clap::Parser;

fn main() {
    let cli = sail_cli::Cli::parse();
    sail_cli::init_logging(cli.verbose);
    std::process::exit(sail_cli::run(cli));
}
