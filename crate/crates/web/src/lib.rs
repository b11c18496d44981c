//! Browser demo of the coreference engine. The page trains a small model on
//! a synthetic corpus, resolves typed text and compresses the result.

pub mod demo;

pub use demo::Demo;

#[cfg(target_arch = "wasm32")]
mod bindings {
    use serde::Serialize;
    use wasm_bindgen::prelude::*;

    fn json<T: Serialize>(value: coref_core::Result<T>) -> Result<String, JsError> {
        let value = value.map_err(|e| JsError::new(&e.to_string()))?;
        serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
    }

    /// Every method returns a JSON string.
    #[wasm_bindgen]
    pub struct CorefDemo(super::Demo);

    #[wasm_bindgen]
    impl CorefDemo {
        #[wasm_bindgen(constructor)]
        pub fn new(seed: u32) -> Result<CorefDemo, JsError> {
            super::Demo::new(seed as u64)
                .map(CorefDemo)
                .map_err(|e| JsError::new(&e.to_string()))
        }

        pub fn train(&mut self, epochs: u32, learning_rate: f64, attention: bool) -> Result<String, JsError> {
            json(self.0.train(epochs as usize, learning_rate, attention))
        }

        pub fn resolve(&self, text: &str) -> Result<String, JsError> {
            json(self.0.resolve(text))
        }

        pub fn compress(&self, sparsity: f64, finetune_epochs: u32) -> Result<String, JsError> {
            json(self.0.compress(sparsity, finetune_epochs as usize))
        }

        pub fn sample(&self, index: u32) -> String {
            self.0.sample(index as usize)
        }

        pub fn lexicon(&self) -> Result<String, JsError> {
            json(Ok(self.0.lexicon()))
        }
    }
}
