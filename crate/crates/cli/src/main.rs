use clap::Parser;
use fraclab_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(manifest) => {
            for f in &manifest.files {
                println!("{}", f.path);
            }
        }
        Err(e) => {
            eprintln!("fraclab: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
