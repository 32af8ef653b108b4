use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use cody_ffi::*;

fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn c_path(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = cody_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

struct Handles {
    graph: *mut CodyGraph,
    session: *mut CodySession,
}

impl Handles {
    fn trace() -> Self {
        let mut graph = ptr::null_mut();
        let mut session = ptr::null_mut();
        let csv = c_path(&core_fixture("greedy_trace.csv"));
        let oracle = CString::new(format!("fixture:{}", core_fixture("greedy_trace.json").display())).unwrap();
        unsafe {
            assert_eq!(cody_graph_load_csv(csv.as_ptr(), true, &mut graph), CodyStatus::Ok);
            assert_eq!(cody_session_new(graph, oracle.as_ptr(), &mut session), CodyStatus::Ok);
        }
        Self { graph, session }
    }
}

impl Drop for Handles {
    fn drop(&mut self) {
        unsafe {
            cody_session_free(self.session);
            cody_graph_free(self.graph);
        }
    }
}

#[test]
fn greedy_trace_through_the_abi() {
    let h = Handles::trace();
    unsafe {
        assert_eq!(cody_graph_num_events(h.graph), 6);
        assert_eq!(cody_graph_num_nodes(h.graph), 2);
        let mut opts = cody_explain_options_default();
        opts.explainer = CodyExplainer::Greedy;
        opts.l = 3;
        let mut result = ptr::null_mut();
        assert_eq!(cody_explain(h.graph, h.session, 5, &opts, &mut result), CodyStatus::Ok);
        assert!(cody_last_error().is_null());

        let n = cody_result_len(result);
        assert_eq!(n, 3);
        let mut buf = vec![0u64; n];
        assert_eq!(cody_result_events(result, buf.as_mut_ptr(), n), 3);
        buf.sort_unstable();
        assert_eq!(buf, vec![0, 3, 4]);
        // a short buffer still reports the full length
        let mut one = [u64::MAX; 1];
        assert_eq!(cody_result_events(result, one.as_mut_ptr(), 1), 3);
        assert_ne!(one[0], u64::MAX);
        assert_eq!(cody_result_events(result, ptr::null_mut(), 0), 3);

        assert!(cody_result_is_counterfactual(result));
        assert_eq!(cody_result_original_logit(result), 2.854);
        assert_eq!(cody_result_achieved_logit(result), -0.052);
        assert_eq!(cody_result_oracle_calls(result), 10);
        assert_eq!(cody_result_iterations(result), 3);
        assert_eq!(cody_result_candidate_size(result), 5);
        assert_eq!(cody_session_oracle_calls(h.session), 10);

        let json = cody_result_to_json(result);
        let value: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(value["explainer"], "greedy");
        assert_eq!(value["oracle_calls"], 10);
        cody_string_free(json);
        cody_result_free(result);
    }
}

#[test]
fn cody_search_with_null_options_uses_defaults() {
    let h = Handles::trace();
    unsafe {
        let mut session = ptr::null_mut();
        let reference = CString::new("reference").unwrap();
        assert_eq!(cody_session_new(h.graph, reference.as_ptr(), &mut session), CodyStatus::Ok);
        let mut result = ptr::null_mut();
        assert_eq!(cody_explain(h.graph, session, 5, ptr::null(), &mut result), CodyStatus::Ok);
        assert!(cody_result_iterations(result) <= 300);
        assert_eq!(cody_result_candidate_size(result), 5);
        let calls = cody_result_oracle_calls(result);
        assert!(calls >= 1);
        cody_result_free(result);

        // a repeat is served from the cache until it is cleared
        assert_eq!(cody_explain(h.graph, session, 5, ptr::null(), &mut result), CodyStatus::Ok);
        assert_eq!(cody_session_oracle_calls(session), calls);
        cody_result_free(result);
        cody_session_clear_cache(session);
        assert_eq!(cody_explain(h.graph, session, 5, ptr::null(), &mut result), CodyStatus::Ok);
        assert_eq!(cody_session_oracle_calls(session), 2 * calls);
        cody_result_free(result);
        cody_session_free(session);
    }
}

#[test]
fn failures_set_status_and_message() {
    let h = Handles::trace();
    unsafe {
        let mut result = ptr::null_mut();
        assert_eq!(cody_explain(h.graph, h.session, 99, ptr::null(), &mut result), CodyStatus::NotFound);
        assert!(result.is_null());
        assert!(last_error().contains("99"), "{}", last_error());

        assert_eq!(
            cody_explain(ptr::null(), h.session, 5, ptr::null(), &mut result),
            CodyStatus::NullPointer
        );
        assert_eq!(last_error(), "graph is null");
        assert_eq!(
            cody_explain(h.graph, h.session, 5, ptr::null(), ptr::null_mut()),
            CodyStatus::NullPointer
        );
        assert_eq!(
            cody_explain_link(h.graph, h.session, 5, 40, ptr::null(), &mut result),
            CodyStatus::InvalidArgument
        );

        // the fixture scripts no prediction for event 0
        let status = cody_explain(h.graph, h.session, 0, ptr::null(), &mut result);
        assert_ne!(status, CodyStatus::Ok);
        assert!(!last_error().is_empty());

        let mut graph = ptr::null_mut();
        let missing = CString::new("/nonexistent/cody.csv").unwrap();
        assert_eq!(cody_graph_load_csv(missing.as_ptr(), false, &mut graph), CodyStatus::Io);
        assert!(graph.is_null());

        let mut session = ptr::null_mut();
        let bad = CString::new("telepathy").unwrap();
        assert_eq!(cody_session_new(h.graph, bad.as_ptr(), &mut session), CodyStatus::InvalidArgument);

        // a successful call clears the message
        let ok = CString::new("reference").unwrap();
        assert_eq!(cody_session_new(h.graph, ok.as_ptr(), &mut session), CodyStatus::Ok);
        assert!(cody_last_error().is_null());
        cody_session_free(session);
    }
}

#[test]
fn malformed_csv_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "user_id,item_id,timestamp,state_label\n0,1,2.0,0\n0,1,oops,0\n").unwrap();
    let mut graph = ptr::null_mut();
    let status = unsafe { cody_graph_load_csv(c_path(&path).as_ptr(), true, &mut graph) };
    assert_eq!(status, CodyStatus::Parse);
    assert!(last_error().contains(":3:"), "{}", last_error());
}

#[test]
fn null_handles_are_tolerated_by_accessors() {
    unsafe {
        assert_eq!(cody_graph_num_events(ptr::null()), 0);
        assert_eq!(cody_result_len(ptr::null()), 0);
        assert!(cody_result_original_logit(ptr::null()).is_nan());
        assert!(cody_result_to_json(ptr::null()).is_null());
        cody_graph_free(ptr::null_mut());
        cody_session_free(ptr::null_mut());
        cody_result_free(ptr::null_mut());
        cody_string_free(ptr::null_mut());
    }
    let version = unsafe { CStr::from_ptr(cody_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "cody.h"

int main(int argc, char **argv) {
    CodyGraph *graph = NULL;
    CodySession *session = NULL;
    CodyResult *result = NULL;
    if (cody_graph_load_csv(argv[1], true, &graph) != CODY_STATUS_OK) return 2;
    if (cody_session_new(graph, argv[2], &session) != CODY_STATUS_OK) return 3;
    CodyExplainOptions opts = cody_explain_options_default();
    opts.explainer = CODY_EXPLAINER_GREEDY;
    opts.l = 3;
    if (cody_explain(graph, session, 5, &opts, &result) != CODY_STATUS_OK) return 4;
    uint64_t ids[8];
    size_t n = cody_result_events(result, ids, 8);
    printf("%zu %d %llu %.3f\n", n, (int)cody_result_is_counterfactual(result),
           (unsigned long long)cody_result_oracle_calls(result), cody_result_achieved_logit(result));
    if (cody_explain(graph, session, 77, NULL, &result) != CODY_STATUS_NOT_FOUND) return 5;
    printf("%s\n", cody_last_error());
    cody_session_free(session);
    cody_graph_free(graph);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    // the static library sits next to the test binary's deps directory
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libcody_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !lib.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or {} missing", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let build = Command::new(&cc)
        .args(["-std=c11", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(build.status.success(), "{}", String::from_utf8_lossy(&build.stderr));

    let oracle = format!("fixture:{}", core_fixture("greedy_trace.json").display());
    let run = Command::new(&bin)
        .arg(core_fixture("greedy_trace.csv"))
        .arg(oracle)
        .output()
        .unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let stdout = String::from_utf8(run.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("3 1 10 -0.052"));
    assert_eq!(lines.next(), Some("event 77 is not part of the graph"));
}
