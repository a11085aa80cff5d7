use clap::Parser;
use obstacle_cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => println!("{text}"),
        Err(e) => {
            eprintln!("obstacle: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
