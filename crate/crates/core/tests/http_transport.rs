//! Live transport against a loopback listener; no external network.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use fakesci_core::transport::{HttpRequest, HttpTransport, Transport, TransportError};

/// Serves one request with `status` and `body`, returning the request body it read.
fn serve_once(status: &'static str, body: &'static str) -> (String, thread::JoinHandle<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/x", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
            if line == "\r\n" {
                break;
            }
        }
        let mut received = vec![0; length];
        reader.read_exact(&mut received).unwrap();
        let mut stream = stream;
        write!(stream, "HTTP/1.1 {status}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len()).unwrap();
        String::from_utf8(received).unwrap()
    });
    (url, handle)
}

#[test]
fn non_success_status_is_returned_not_raised() {
    let (url, server) = serve_once("404 Not Found", "nope");
    let resp = HttpTransport::new().send(&HttpRequest::get(url)).unwrap();
    assert_eq!((resp.status, resp.body.as_str()), (404, "nope"));
    server.join().unwrap();
}

#[test]
fn post_sends_body() {
    let (url, server) = serve_once("200 OK", "[]");
    let resp = HttpTransport::new().send(&HttpRequest::post_json(url, r#"{"a":1}"#.into())).unwrap();
    assert!(resp.is_success());
    assert_eq!(server.join().unwrap(), r#"{"a":1}"#);
}

#[test]
fn silent_server_times_out() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/slow", listener.local_addr().unwrap());
    let _hold = thread::spawn(move || {
        let conn = listener.accept();
        thread::sleep(Duration::from_secs(2));
        drop(conn);
    });
    let req = HttpRequest::get(url).with_timeout(Duration::from_millis(200));
    assert!(matches!(HttpTransport::new().send(&req), Err(TransportError::Timeout)));
}
