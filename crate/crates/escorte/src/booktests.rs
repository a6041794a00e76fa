//! Compiles the guide's code snippets as doctests, keeping `book/` and the
//! crate in lockstep: `cargo test` fails if a chapter drifts from the API.
#![cfg(doctest)]

macro_rules! book_chapter {
    ($name:ident, $path:literal) => {
        #[doc = include_str!($path)]
        pub struct $name;
    };
}

book_chapter!(Introduction, "../../../book/src/introduction.md");
book_chapter!(Numerics, "../../../book/src/numerics.md");
book_chapter!(Reid, "../../../book/src/reid.md");
book_chapter!(ActionDetection, "../../../book/src/action.md");
book_chapter!(Simworld, "../../../book/src/simworld.md");
book_chapter!(EscortControl, "../../../book/src/escortctl.md");
book_chapter!(Evaluation, "../../../book/src/evaluation.md");
book_chapter!(FileFormats, "../../../book/src/formats.md");
