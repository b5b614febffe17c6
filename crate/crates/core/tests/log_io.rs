mod common;

use common::*;
use singavoid_core::config::parse_scenario;
use singavoid_core::log_io::*;
use singavoid_core::runner::Event;
use singavoid_core::{run_scenario, LogRecord};

fn short_run() -> Vec<LogRecord> {
    let mut cfg = parse_scenario(&scenario_path("complemented_three_push.json")).unwrap();
    cfg.duration = 4.5;
    run_scenario(&cfg).unwrap().records
}

#[test]
fn jsonl_round_trip_is_exact() {
    let recs = short_run();
    assert!(recs.iter().any(|r| r.has(Event::AvoidanceEnter)));
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &recs).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().count(), recs.len());
    assert_eq!(read_jsonl(buf.as_slice()).unwrap(), recs);
}

#[test]
fn csv_round_trip_is_exact() {
    let recs = short_run();
    let mut buf = Vec::new();
    write_csv(&mut buf, &recs).unwrap();
    assert_eq!(read_csv(buf.as_slice()).unwrap(), recs);
}

#[test]
fn csv_header_order() {
    let cols = csv_columns();
    assert_eq!(&cols[..3], &["tick", "t", "f_c_fx"]);
    assert_eq!(cols.last().unwrap(), "events");
    assert_eq!(cols.len(), 2 + 4 * 3 + 4 * 4 + 4 * 3 + 5 + 4 + 1 + 4 + 2);
    let mut rec = blank_record(3);
    rec.events = vec![Event::ReturnComplete, Event::AvoidanceExit];
    let mut buf = Vec::new();
    write_csv(&mut buf, &[rec]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.ends_with(",return_complete;avoidance_exit"));
    assert!(row.contains(",1-2,"));
}

#[test]
fn bad_inputs_name_the_line() {
    let good = {
        let mut b = Vec::new();
        write_jsonl(&mut b, &[blank_record(0)]).unwrap();
        String::from_utf8(b).unwrap()
    };
    let text = format!("{good}{{\"tick\": 1}}\n");
    match read_jsonl(text.as_bytes()) {
        Err(singavoid_core::IoError::Log { line, .. }) => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
    assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
}
