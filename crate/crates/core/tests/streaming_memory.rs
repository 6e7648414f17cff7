//! Peak heap use while reading a WARC file must track the largest record,
//! not the file size.

use std::alloc::{GlobalAlloc, Layout, System};
use std::fs::File;
use std::io::BufWriter;
use std::sync::atomic::{AtomicUsize, Ordering};

use warc2meta::synth::WarcWriter;
use warc2meta::warc::open_warc_stream;

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            let now = LIVE.fetch_add(layout.size(), Ordering::SeqCst) + layout.size();
            PEAK.fetch_max(now, Ordering::SeqCst);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        LIVE.fetch_sub(layout.size(), Ordering::SeqCst);
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

const RECORDS: usize = 600;
const RECORD_BYTES: usize = 64 * 1024;

fn write_big(path: &std::path::Path, gzip: bool) {
    let mut w = WarcWriter::new(BufWriter::new(File::create(path).unwrap()), gzip);
    let body: Vec<u8> = (0..RECORD_BYTES).map(|i| b"abcdefghij <p>\n"[i % 15]).collect();
    for i in 0..RECORDS {
        let url = format!("https://big.sg/page-{i}");
        w.request(&url).unwrap();
        w.response(&url, 200, "text/html", &body).unwrap();
    }
    w.finish().unwrap();
}

fn peak_while_reading(path: &std::path::Path) -> (usize, usize) {
    let base = LIVE.load(Ordering::SeqCst);
    PEAK.store(base, Ordering::SeqCst);
    let mut records = 0;
    for r in open_warc_stream(path).unwrap() {
        let r = r.unwrap();
        assert!(r.payload.len() > RECORD_BYTES);
        records += 1;
    }
    (records, PEAK.load(Ordering::SeqCst) - base)
}

#[test]
fn peak_memory_is_bounded_by_record_size() {
    let dir = tempfile::tempdir().unwrap();
    for gzip in [false, true] {
        let path = dir.path().join(if gzip { "big.warc.gz" } else { "big.warc" });
        write_big(&path, gzip);
        let (records, peak) = peak_while_reading(&path);
        let file_size = std::fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(records, RECORDS);
        // A few record-sized buffers plus reader state; the uncompressed
        // stream is ~40 MB.
        assert!(peak < 8 * RECORD_BYTES + 256 * 1024, "gzip={gzip}: peak {peak} bytes, file {file_size} bytes");
        assert!(peak * 20 < RECORDS * RECORD_BYTES);
    }
}
