//! Steady-state sampling must not touch the heap.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use qec_abort::circuit::build_memory_circuit;
use qec_abort::frame::FrameSimulator;
use qec_abort::layout::{build_layout, CheckKind};

struct Counting;

static ALLOCATIONS: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        ALLOCATIONS.fetch_add(1, Ordering::Relaxed);
        unsafe { System.alloc(layout) }
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) }
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

#[test]
fn sample_into_reuses_its_buffers() {
    let layout = build_layout(5).unwrap();
    let circuit = build_memory_circuit(&layout, 5, 0.01, CheckKind::X).unwrap();
    let mut sim = FrameSimulator::new();
    let mut h = circuit.empty_history();
    sim.sample_into(&circuit, 0, &mut h);
    let before = ALLOCATIONS.load(Ordering::Relaxed);
    for seed in 1..2000 {
        sim.sample_into(&circuit, seed, &mut h);
    }
    assert_eq!(ALLOCATIONS.load(Ordering::Relaxed) - before, 0);
}
