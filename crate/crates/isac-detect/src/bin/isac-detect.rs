fn main() {
    // Restore the default SIGPIPE disposition so piping into `head` or a
    // closed pager terminates quietly instead of panicking mid-print.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(isac_detect::cli::main_entry());
}
