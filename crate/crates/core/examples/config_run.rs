//! Running an experiment from an inline TOML config without the binary.

use anisofrac::cli::{execute, parse_config, Task};

const CONFIG: &str = r#"
[kernel]
name = "separable-angular"
[kernel.params]
c2 = 1.5
[grid]
n = 2
N = 17
[params]
s = 0.6
u = "bump(-1, 1, x) * bump(-0.5, 1, y)"
"#;

fn main() {
    match parse_config(CONFIG, Task::Energy, std::path::Path::new(".")) {
        Ok(cfg) => match execute(&cfg) {
            Ok(a) => println!("{}{}", a.csv, a.summary),
            Err(e) => eprintln!("{e}"),
        },
        Err(errs) => errs.iter().for_each(|e| eprintln!("{e}")),
    }
    let broken = CONFIG.replace("s = 0.6", "s = 1.6").replace("N = 17", "N = 2");
    for e in parse_config(&broken, Task::Energy, std::path::Path::new(".")).unwrap_err() {
        println!("rejected: {e}");
    }
}
