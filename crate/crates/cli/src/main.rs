use clap::Parser;

fn main() {
    let cli = cla_cli::Cli::parse();
    match cla_cli::run(&cli) {
        Ok(dir) => println!("{}", dir.display()),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(cla_cli::exit_code(&e));
        }
    }
}
