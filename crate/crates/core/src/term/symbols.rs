use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

/// An interned function symbol. Name and arity together form its identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FunctionSymbol {
    pub(crate) id: u32,
    pub(crate) arity: u32,
}

impl FunctionSymbol {
    pub fn id(self) -> u32 {
        self.id
    }

    pub fn arity(self) -> usize {
        self.arity as usize
    }
}

impl fmt::Display for FunctionSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}/{}", self.id, self.arity)
    }
}

#[derive(Default)]
struct Inner {
    by_key: HashMap<(Arc<str>, u32), u32>,
    names: Vec<Arc<str>>,
}

#[derive(Default)]
pub(crate) struct SymbolTable {
    inner: RwLock<Inner>,
}

impl SymbolTable {
    pub(crate) fn declare(&self, name: &str, arity: usize) -> FunctionSymbol {
        let arity = u32::try_from(arity).expect("arity exceeds u32");
        if let Some(&id) = self
            .inner
            .read()
            .unwrap()
            .by_key
            .get(&(Arc::<str>::from(name), arity))
        {
            return FunctionSymbol { id, arity };
        }
        let mut inner = self.inner.write().unwrap();
        let name: Arc<str> = name.into();
        let next = inner.names.len() as u32;
        let id = *inner.by_key.entry((name.clone(), arity)).or_insert(next);
        if id == next {
            inner.names.push(name);
        }
        FunctionSymbol { id, arity }
    }

    pub(crate) fn name(&self, symbol: FunctionSymbol) -> Arc<str> {
        self.inner.read().unwrap().names[symbol.id as usize].clone()
    }
}
