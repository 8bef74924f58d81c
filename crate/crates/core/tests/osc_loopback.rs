use std::net::{SocketAddr, UdpSocket};
use std::time::Duration;

use somaphone::breath::PressureFrame;
use somaphone::osc::{
    decode_osc, encode_osc, ControlEvent, Cue, GatewayConfig, OscArg, OscGateway, OscMessage, OscPacket, Outbound,
};
use somaphone::SectionId;

fn loopback() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 0))
}

fn pressure(pillow: u8, hpa: f32) -> Vec<u8> {
    encode_osc(&OscMessage::new(format!("/pillow/{pillow}/pressure"), vec![OscArg::Float(hpa)])).unwrap()
}

#[test]
fn thousand_readings_arrive_in_order() {
    let (tx, rx) = crossbeam_channel::unbounded();
    let gw = OscGateway::serve(&GatewayConfig { listen: Some(loopback()), send_to: None, control_rate_hz: 100.0 }, tx).unwrap();
    let dest = gw.local_addr().unwrap();
    let client = UdpSocket::bind(loopback()).unwrap();

    let mut got = Vec::new();
    for batch in 0..20 {
        for k in 0..50 {
            let i = batch * 50 + k;
            client.send_to(&pressure((i % 4 + 1) as u8, 1000.0 + i as f32 * 0.01), dest).unwrap();
        }
        while got.len() < (batch + 1) * 50 {
            got.push(rx.recv_timeout(Duration::from_secs(2)).expect("reading lost"));
        }
    }
    for (i, ev) in got.iter().enumerate() {
        assert_eq!(*ev, ControlEvent::PressureReading { pillow: (i % 4 + 1) as u8, hpa: 1000.0 + i as f32 * 0.01 });
    }
    assert_eq!(gw.stats().dropped(), 0);
}

#[test]
fn malformed_burst_is_counted_and_survived() {
    let (tx, rx) = crossbeam_channel::unbounded();
    let gw = OscGateway::serve(&GatewayConfig { listen: Some(loopback()), send_to: None, control_rate_hz: 100.0 }, tx).unwrap();
    let dest = gw.local_addr().unwrap();
    let client = UdpSocket::bind(loopback()).unwrap();

    let junk: [&[u8]; 5] = [b"", b"/pillow", b"\xff\xff\xff\xff", b"#bundle\0\0\0\0\0", b"/nowhere\0\0\0\0,f\0\0\0\0\0\0"];
    for _ in 0..20 {
        for j in junk {
            client.send_to(j, dest).unwrap();
        }
    }
    client
        .send_to(&encode_osc(&OscMessage::new("/section/goto", vec![OscArg::Str("questioning".into())])).unwrap(), dest)
        .unwrap();
    let ev = rx.recv_timeout(Duration::from_secs(2)).unwrap();
    assert_eq!(ev, ControlEvent::SectionCue(Cue::Goto(SectionId::Questioning)));
    assert_eq!(gw.stats().dropped(), 100);
}

#[test]
fn outbound_frames_are_bundled_telemetry() {
    let sink = UdpSocket::bind(loopback()).unwrap();
    sink.set_read_timeout(Some(Duration::from_secs(2))).unwrap();
    let (tx, _rx) = crossbeam_channel::unbounded();
    let gw = OscGateway::serve(
        &GatewayConfig { listen: None, send_to: Some(sink.local_addr().unwrap()), control_rate_hz: 100.0 },
        tx,
    )
    .unwrap();
    gw.publish(Outbound::Frame(PressureFrame { t: 0.0, seq: 0, values: [1001.0, 1002.0, 1003.0, 1004.0] }));
    gw.publish(Outbound::Fatigue(0.25));

    let mut buf = [0u8; 2048];
    let n = sink.recv(&mut buf).unwrap();
    let OscPacket::Bundle(bundle) = decode_osc(&buf[..n]).unwrap() else { panic!("expected a bundle") };
    let msgs: Vec<_> = bundle.elements.iter().flat_map(|p| p.messages()).collect();
    assert_eq!(msgs.len(), 5);
    assert_eq!(msgs[0].address, "/pillow/1/pressure");
    assert_eq!(msgs[3].args, vec![OscArg::Float(1004.0)]);
    assert_eq!(msgs[4].address, "/body/fatigue");
}
