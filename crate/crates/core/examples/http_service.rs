//! Start the testbench service on an ephemeral port and query it once.

use crosswarn::config::LoadedConfig;
use crosswarn::scenario::Suite;
use crosswarn::service::{http::router, AppState};

#[tokio::main]
async fn main() {
    let state = AppState::new(LoadedConfig::bundled().unwrap(), Suite::bundled().unwrap()).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });

    // plain HTTP/1.0 so no client crate is needed
    let resp = tokio::task::spawn_blocking(move || {
        use std::io::{Read, Write};
        let mut conn = std::net::TcpStream::connect(addr).unwrap();
        conn.write_all(b"GET /gates HTTP/1.0\r\nHost: localhost\r\n\r\n").unwrap();
        let mut resp = String::new();
        conn.read_to_string(&mut resp).unwrap();
        resp
    })
    .await
    .unwrap();
    println!("{}", resp.split("\r\n\r\n").nth(1).unwrap_or(&resp));
}
