use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let code = match ambistop_cli::parse_args(&argv).and_then(|cfg| {
        ambistop_cli::init_thread_pool()?;
        ambistop_cli::run(&cfg)
    }) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(ambistop_cli::CliError::Usage(text)) if ambistop_cli::args::is_informational(&argv) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
