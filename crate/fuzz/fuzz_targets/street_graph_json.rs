#![no_main]
use libfuzzer_sys::fuzz_target;
use walkgap::routing::{shortest_path, StreetGraph};

fuzz_target!(|data: &[u8]| {
    if let Ok(graph) = StreetGraph::from_json(data) {
        // a graph that parsed must survive a write/read cycle and routing
        let again = StreetGraph::from_json(graph.to_json().as_bytes()).expect("round trip");
        assert_eq!(again.nodes().len(), graph.nodes().len());
        if let (Some(a), Some(b)) = (graph.nodes().first(), graph.nodes().last()) {
            let _ = shortest_path(&graph, a, b);
        }
    }
});
