fn main() {
    let out = qinstrument_cli::run(std::env::args_os());
    if let Some(report) = &out.report {
        println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
    }
    if !out.human.is_empty() {
        eprintln!("{}", out.human.trim_end());
    }
    std::process::exit(out.code);
}
