//! In-flight request limiting: a counting semaphore and a client wrapper
//! that holds a permit for the duration of each call.

use std::sync::{Condvar, Mutex};

use super::{
    AsrClient, ChatClient, ChatMessage, ChatParams, ClientError, EmbedClient, SeparationClient,
};
use crate::audio::AudioClip;
use crate::model::TimedTranscript;

/// A counting semaphore built on `Mutex` + `Condvar`.
#[derive(Debug)]
pub struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        assert!(permits >= 1, "semaphore needs at least one permit");
        Semaphore {
            permits: Mutex::new(permits),
            available: Condvar::new(),
        }
    }

    /// Blocks until a permit is free; the permit is released when the guard
    /// drops.
    pub fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

/// RAII permit; dropping it wakes one waiter.
pub struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().unwrap();
        *permits += 1;
        self.semaphore.available.notify_one();
    }
}

/// Wraps any client so at most `max_in_flight` calls run concurrently.
#[derive(Debug)]
pub struct Bounded<C> {
    inner: C,
    semaphore: Semaphore,
}

impl<C> Bounded<C> {
    pub fn new(inner: C, max_in_flight: usize) -> Self {
        Bounded {
            inner,
            semaphore: Semaphore::new(max_in_flight),
        }
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }
}

impl<C: AsrClient> AsrClient for Bounded<C> {
    fn transcribe(&self, audio: &AudioClip) -> Result<TimedTranscript, ClientError> {
        let _permit = self.semaphore.acquire();
        self.inner.transcribe(audio)
    }
}

impl<C: SeparationClient> SeparationClient for Bounded<C> {
    fn separate(&self, audio: &AudioClip, prompt: &str) -> Result<AudioClip, ClientError> {
        let _permit = self.semaphore.acquire();
        self.inner.separate(audio, prompt)
    }
}

impl<C: ChatClient> ChatClient for Bounded<C> {
    fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, ClientError> {
        let _permit = self.semaphore.acquire();
        self.inner.chat(messages, params)
    }

    fn supports_audio(&self) -> bool {
        self.inner.supports_audio()
    }
}

impl<C: EmbedClient> EmbedClient for Bounded<C> {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ClientError> {
        let _permit = self.semaphore.acquire();
        self.inner.embed(texts)
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }
}
