use std::alloc::{self, Layout};
use std::ptr::{self, NonNull};
use std::sync::atomic::{AtomicPtr, AtomicU8, Ordering::Relaxed};

use crate::protection::RefCount;

/// Header of a term node; `arity` child pointers follow it in the same
/// allocation. Everything except `next`, `refs` and `mark` is immutable once
/// the node is published.
#[repr(C)]
pub(crate) struct Node {
    /// Bucket list link. Rewritten only inside the exclusive section.
    pub(crate) next: AtomicPtr<Node>,
    pub(crate) hash: u64,
    pub(crate) refs: RefCount,
    pub(crate) symbol: u32,
    pub(crate) arity: u32,
    /// Collector scratch bit.
    pub(crate) mark: AtomicU8,
}

fn layout(arity: usize) -> (Layout, usize) {
    let (layout, offset) = Layout::new::<Node>()
        .extend(Layout::array::<NonNull<Node>>(arity).expect("arity overflow"))
        .expect("node layout overflow");
    (layout.pad_to_align(), offset)
}

impl Node {
    /// Allocates an unpublished node, or `None` when the allocator fails.
    pub(crate) fn alloc(symbol: u32, args: &[NonNull<Node>], hash: u64) -> Option<NonNull<Node>> {
        let (layout, offset) = layout(args.len());
        // SAFETY: the layout has non-zero size (the header is not empty).
        let raw = unsafe { alloc::alloc(layout) };
        let node = NonNull::new(raw as *mut Node)?;
        // SAFETY: fresh allocation of the right layout; children are written
        // into the trailing array computed by `layout`.
        unsafe {
            ptr::write(
                node.as_ptr(),
                Node {
                    next: AtomicPtr::new(ptr::null_mut()),
                    hash,
                    refs: RefCount::new(0),
                    symbol,
                    arity: args.len() as u32,
                    mark: AtomicU8::new(0),
                },
            );
            let children = raw.add(offset) as *mut NonNull<Node>;
            ptr::copy_nonoverlapping(args.as_ptr(), children, args.len());
        }
        Some(node)
    }

    /// # Safety
    /// `node` came from [`Node::alloc`], is unreachable, and is not used again.
    pub(crate) unsafe fn free(node: NonNull<Node>) {
        let (layout, _) = layout(node.as_ref().arity as usize);
        ptr::drop_in_place(node.as_ptr());
        alloc::dealloc(node.as_ptr() as *mut u8, layout);
    }

    pub(crate) fn children(&self) -> &[NonNull<Node>] {
        let (_, offset) = layout(0);
        // SAFETY: `arity` children were written after the header at alloc.
        unsafe {
            let base = (self as *const Node as *const u8).add(offset) as *const NonNull<Node>;
            std::slice::from_raw_parts(base, self.arity as usize)
        }
    }

    pub(crate) fn represents(&self, symbol: u32, args: &[NonNull<Node>]) -> bool {
        self.symbol == symbol && self.children() == args
    }

    pub(crate) fn is_marked(&self) -> bool {
        self.mark.load(Relaxed) != 0
    }

    pub(crate) fn set_mark(&self, on: bool) {
        self.mark.store(on as u8, Relaxed);
    }
}

const SEED: u64 = 0x5851_f42d_4c95_7f2d;

pub(crate) fn hash_term(symbol: u32, args: &[NonNull<Node>]) -> u64 {
    const K: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut h = (u64::from(symbol) ^ SEED).wrapping_mul(K);
    for a in args {
        h = (h.rotate_left(23) ^ a.as_ptr() as u64).wrapping_mul(K);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}
