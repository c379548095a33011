//! Drives the C ABI exactly as a foreign caller would: raw pointers, flat
//! buffers, status codes.

use std::ffi::CString;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use elm_ffi::*;

fn synth_data(inputs: usize, outputs: usize, samples: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x: Vec<f64> = (0..inputs * samples)
        .map(|_| rng.gen_range(-1.0..=1.0))
        .collect();
    let mut y = vec![0.0; outputs * samples];
    for k in 0..samples {
        for m in 0..outputs {
            let mut acc = 0.0;
            for n in 0..inputs {
                acc += ((m + n + 1) as f64 * x[n * samples + k]).sin();
            }
            y[m * samples + k] = acc;
        }
    }
    (x, y)
}

#[test]
fn full_lifecycle_through_the_c_abi() {
    let (inputs, outputs, samples) = (3usize, 2usize, 60usize);
    let (x, y) = synth_data(inputs, outputs, samples);

    let mut session: *mut ElmSession = std::ptr::null_mut();
    let status = unsafe {
        elm_train(
            x.as_ptr(),
            inputs,
            samples,
            y.as_ptr(),
            outputs,
            10,
            1.0,
            ElmVariant::Factored,
            ElmActivation::Tanh,
            5,
            false,
            &mut session,
        )
    };
    assert_eq!(status, ElmStatus::Ok);
    assert!(!session.is_null());
    assert_eq!(unsafe { elm_session_node_count(session) }, 10);
    assert_eq!(unsafe { elm_session_input_count(session) }, 3);
    assert_eq!(unsafe { elm_session_output_count(session) }, 2);

    assert_eq!(unsafe { elm_session_grow(session, 4, 99) }, ElmStatus::Ok);
    assert_eq!(unsafe { elm_session_node_count(session) }, 14);

    let doomed = [0usize, 7, 13];
    assert_eq!(
        unsafe { elm_session_prune(session, doomed.as_ptr(), doomed.len()) },
        ElmStatus::Ok
    );
    assert_eq!(unsafe { elm_session_node_count(session) }, 11);

    let mut report = ElmVerifyReport {
        weight_deviation: f64::NAN,
        gram_deviation: f64::NAN,
        mse: f64::NAN,
        node_count: 0,
        sample_count: 0,
    };
    assert_eq!(
        unsafe { elm_session_verify(session, &mut report) },
        ElmStatus::Ok
    );
    assert!(report.weight_deviation <= 1e-9);
    assert!(report.gram_deviation <= 1e-9);
    assert_eq!(report.node_count, 11);
    assert_eq!(report.sample_count, 60);

    let mut weights = vec![0.0; outputs * 11];
    assert_eq!(
        unsafe { elm_session_weights(session, weights.as_mut_ptr(), weights.len()) },
        ElmStatus::Ok
    );
    assert!(weights.iter().any(|&w| w != 0.0));

    let mut predictions = vec![0.0; outputs * samples];
    assert_eq!(
        unsafe {
            elm_session_predict(
                session,
                x.as_ptr(),
                inputs,
                samples,
                predictions.as_mut_ptr(),
                predictions.len(),
            )
        },
        ElmStatus::Ok
    );
    let sse: f64 = predictions
        .iter()
        .zip(&y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    assert!(sse.is_finite());

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.elm").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { elm_session_save(session, path.as_ptr(), false) },
        ElmStatus::Ok
    );

    let mut resumed: *mut ElmSession = std::ptr::null_mut();
    assert_eq!(
        unsafe {
            elm_load_session(
                path.as_ptr(),
                x.as_ptr(),
                inputs,
                samples,
                y.as_ptr(),
                outputs,
                &mut resumed,
            )
        },
        ElmStatus::Ok
    );
    let mut report2 = report;
    assert_eq!(
        unsafe { elm_session_verify(resumed, &mut report2) },
        ElmStatus::Ok
    );
    assert!(report2.weight_deviation <= 1e-9);

    unsafe {
        elm_session_free(session);
        elm_session_free(resumed);
        elm_session_free(std::ptr::null_mut()); // must be a safe no-op
    }
}

#[test]
fn error_paths_set_messages_and_codes() {
    // null pointers
    let mut out: *mut ElmSession = std::ptr::null_mut();
    let status = unsafe {
        elm_train(
            std::ptr::null(),
            2,
            10,
            std::ptr::null(),
            1,
            4,
            1.0,
            ElmVariant::GramInverse,
            ElmActivation::Sigmoid,
            0,
            false,
            &mut out,
        )
    };
    assert_eq!(status, ElmStatus::NullArgument);
    let msg = unsafe { std::ffi::CStr::from_ptr(elm_last_error_message()) };
    assert!(!msg.to_bytes().is_empty());

    // zero ridge without the override
    let (x, y) = synth_data(2, 1, 20);
    let status = unsafe {
        elm_train(
            x.as_ptr(),
            2,
            20,
            y.as_ptr(),
            1,
            4,
            0.0,
            ElmVariant::GramInverse,
            ElmActivation::Sigmoid,
            0,
            false,
            &mut out,
        )
    };
    assert_eq!(status, ElmStatus::InvalidArgument);

    // pruning everything is rejected and leaves the session usable
    let status = unsafe {
        elm_train(
            x.as_ptr(),
            2,
            20,
            y.as_ptr(),
            1,
            4,
            1.0,
            ElmVariant::Factored,
            ElmActivation::Sigmoid,
            0,
            false,
            &mut out,
        )
    };
    assert_eq!(status, ElmStatus::Ok);
    let all = [0usize, 1, 2, 3];
    assert_eq!(
        unsafe { elm_session_prune(out, all.as_ptr(), all.len()) },
        ElmStatus::InvalidArgument
    );
    assert_eq!(unsafe { elm_session_node_count(out) }, 4);

    // short buffer
    let mut tiny = [0.0f64; 1];
    assert_eq!(
        unsafe { elm_session_weights(out, tiny.as_mut_ptr(), tiny.len()) },
        ElmStatus::ShapeMismatch
    );

    // loading a light save is an invalid-state error
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("light.elm").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { elm_session_save(out, path.as_ptr(), true) },
        ElmStatus::Ok
    );
    let mut resumed: *mut ElmSession = std::ptr::null_mut();
    assert_eq!(
        unsafe {
            elm_load_session(path.as_ptr(), x.as_ptr(), 2, 20, y.as_ptr(), 1, &mut resumed)
        },
        ElmStatus::InvalidState
    );
    assert!(resumed.is_null());

    unsafe { elm_session_free(out) };
}

#[test]
fn generated_header_covers_the_api() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/elm.h"
    ))
    .expect("header generated by build script");
    for symbol in [
        "elm_train",
        "elm_load_session",
        "elm_session_grow",
        "elm_session_prune",
        "elm_session_verify",
        "elm_session_weights",
        "elm_session_predict",
        "elm_session_save",
        "elm_session_free",
        "elm_last_error_message",
        "typedef struct ElmSession ElmSession;",
        "ElmVerifyReport",
    ] {
        assert!(header.contains(symbol), "header is missing '{}'", symbol);
    }
}
