use clap::Parser;
use vecdep_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    let result = vecdep_cli::configure_threads().and_then(|()| vecdep_cli::run(&cli));
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(vecdep_cli::exit_code(&e));
    }
}
