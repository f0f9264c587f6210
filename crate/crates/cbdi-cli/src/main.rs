use clap::Parser;

fn main() {
    let cli = cbdi_cli::Cli::parse();
    match cbdi_cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}
