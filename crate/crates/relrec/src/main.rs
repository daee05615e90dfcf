fn main() {
    if let Err(err) = relrec::cli::run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
