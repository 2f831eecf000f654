//! Passphrase acquisition: file descriptor, environment variable, or
//! interactive prompt with terminal echo disabled. Never a command-line
//! argument.

use std::io::{self, BufRead, BufReader};

use sdms::error::Error;

/// Resolves a passphrase: explicit fd first, then the environment variable,
/// then a prompt (echo off on a terminal, a plain stdin line otherwise).
pub fn resolve(pass_fd: Option<i32>, env_var: &str, prompt: &str) -> Result<String, Error> {
    if let Some(fd) = pass_fd {
        return read_from_fd(fd);
    }
    if let Ok(pass) = std::env::var(env_var) {
        return Ok(pass);
    }
    prompt_passphrase(prompt)
}

/// Resolves the replacement passphrase for `passwd`; prompts twice and
/// insists the entries match when falling through to the terminal.
pub fn resolve_new(new_pass_fd: Option<i32>, env_var: &str) -> Result<String, Error> {
    if let Some(fd) = new_pass_fd {
        return read_from_fd(fd);
    }
    if let Ok(pass) = std::env::var(env_var) {
        return Ok(pass);
    }
    let first = prompt_passphrase("New passphrase: ")?;
    let second = prompt_passphrase("Repeat new passphrase: ")?;
    if first != second {
        return Err(Error::Contract("passphrases do not match".into()));
    }
    Ok(first)
}

fn read_from_fd(fd: i32) -> Result<String, Error> {
    if fd < 0 {
        return Err(Error::Config(format!("invalid passphrase fd {fd}")));
    }
    // Ownership of the descriptor transfers here and it closes on drop;
    // fd 0 is duplicated so stdin stays usable for payload data.
    let file = unsafe {
        use std::os::fd::FromRawFd;
        if fd == 0 {
            let dup = libc::dup(0);
            if dup < 0 {
                return Err(Error::Io(io::Error::last_os_error()));
            }
            std::fs::File::from_raw_fd(dup)
        } else {
            std::fs::File::from_raw_fd(fd)
        }
    };
    let mut line = String::new();
    BufReader::new(file).read_line(&mut line)?;
    Ok(trim_newline(line))
}

fn prompt_passphrase(prompt: &str) -> Result<String, Error> {
    use std::io::Write as _;
    let interactive = unsafe { libc::isatty(0) } == 1;
    eprint!("{prompt}");
    io::stderr().flush().ok();

    let _echo_guard = if interactive { EchoGuard::disable() } else { None };
    let mut line = String::new();
    io::stdin().lock().read_line(&mut line)?;
    if interactive {
        eprintln!();
    }
    let pass = trim_newline(line);
    if pass.is_empty() {
        return Err(Error::Contract("passphrase must not be empty".into()));
    }
    Ok(pass)
}

fn trim_newline(mut line: String) -> String {
    while line.ends_with('\n') || line.ends_with('\r') {
        line.pop();
    }
    line
}

/// Restores terminal echo when dropped.
struct EchoGuard {
    original: libc::termios,
}

impl EchoGuard {
    fn disable() -> Option<Self> {
        unsafe {
            let mut term: libc::termios = std::mem::zeroed();
            if libc::tcgetattr(0, &mut term) != 0 {
                return None;
            }
            let original = term;
            term.c_lflag &= !libc::ECHO;
            if libc::tcsetattr(0, libc::TCSANOW, &term) != 0 {
                return None;
            }
            Some(EchoGuard { original })
        }
    }
}

impl Drop for EchoGuard {
    fn drop(&mut self) {
        unsafe {
            libc::tcsetattr(0, libc::TCSANOW, &self.original);
        }
    }
}
