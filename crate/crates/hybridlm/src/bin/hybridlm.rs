use std::process::ExitCode;

fn main() -> ExitCode {
    let mut stdout = std::io::stdout().lock();
    match hybridlm::cli::run(std::env::args_os(), &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string();
            match e {
                hybridlm::Error::Usage(_) => eprintln!("{}", msg.trim_end()),
                _ => eprintln!("error: {}", msg.trim_end()),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
