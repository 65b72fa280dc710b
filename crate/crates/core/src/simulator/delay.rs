use std::collections::VecDeque;

/// Fixed-length ring buffer returning the value pushed `delay` steps ago.
///
/// The first push fills the whole history, so samples before the first push
/// are the constant extension of the first value.
#[derive(Clone, Debug)]
pub struct DelayLine<T> {
    delay: usize,
    buf: VecDeque<T>,
}

impl<T: Clone> DelayLine<T> {
    pub fn new(delay: usize) -> Self {
        DelayLine {
            delay,
            buf: VecDeque::with_capacity(delay + 1),
        }
    }

    /// A line whose history is already `value` everywhere.
    pub fn filled(delay: usize, value: T) -> Self {
        DelayLine {
            delay,
            buf: std::iter::repeat_n(value, delay + 1).collect(),
        }
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn is_primed(&self) -> bool {
        !self.buf.is_empty()
    }

    /// Records the current sample.
    pub fn push(&mut self, value: T) {
        if self.buf.is_empty() {
            self.buf.extend(std::iter::repeat_n(value, self.delay + 1));
            return;
        }
        self.buf.pop_front();
        self.buf.push_back(value);
    }

    /// The sample pushed `delay` steps before the latest one.
    ///
    /// # Panics
    /// If nothing has been pushed yet.
    pub fn delayed(&self) -> &T {
        self.buf.front().expect("delay line read before first push")
    }

    pub fn latest(&self) -> &T {
        self.buf.back().expect("delay line read before first push")
    }
}
