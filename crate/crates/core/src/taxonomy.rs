//! The fixed status-code table.
//!
//! The table holds `Success`, four harness codes, and the built-in exception
//! names of the 2.7 and 3.7 interpreter generations. It is versioned: any
//! change to membership or numbering must bump [`TAXONOMY_VERSION`], since
//! stored results carry the version they were classified under.

use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const TAXONOMY_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Success,
    InterpreterError,
    Harness,
}

/// One entry of the taxonomy. Only ever obtained from [`TAXONOMY`], so two
/// codes are equal iff they are the same table entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StatusCode {
    name: &'static str,
    numeric_id: u8,
    category: Category,
}

impl StatusCode {
    const fn new(name: &'static str, numeric_id: u8, category: Category) -> Self {
        Self {
            name,
            numeric_id,
            category,
        }
    }

    pub const fn name(&self) -> &'static str {
        self.name
    }

    pub const fn numeric_id(&self) -> u8 {
        self.numeric_id
    }

    pub const fn category(&self) -> Category {
        self.category
    }

    pub fn is_success(&self) -> bool {
        self.numeric_id == 0
    }

    /// True for the two codes that trigger dependency installation.
    pub fn is_import_failure(&self) -> bool {
        *self == IMPORT_ERROR || *self == MODULE_NOT_FOUND_ERROR
    }

    pub fn from_name(name: &str) -> Option<StatusCode> {
        TAXONOMY.iter().copied().find(|c| c.name == name)
    }

    pub fn from_numeric_id(id: u8) -> Option<StatusCode> {
        TAXONOMY.get(id as usize).copied()
    }
}

impl PartialOrd for StatusCode {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StatusCode {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.numeric_id.cmp(&other.numeric_id)
    }
}

impl fmt::Display for StatusCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

impl Serialize for StatusCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name)
    }
}

impl<'de> Deserialize<'de> for StatusCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let name = alloc::string::String::deserialize(deserializer)?;
        StatusCode::from_name(&name)
            .ok_or_else(|| serde::de::Error::custom(alloc::format!("unknown status code {name:?}")))
    }
}

use Category::{Harness as H, InterpreterError as E};

pub const SUCCESS: StatusCode = StatusCode::new("Success", 0, Category::Success);
pub const TIMEOUT: StatusCode = StatusCode::new("Timeout", 1, H);
pub const SPAWN_ERROR: StatusCode = StatusCode::new("SpawnError", 2, H);
pub const EXIT_CODE_EXCEPTION: StatusCode = StatusCode::new("ExitCodeException", 3, H);
pub const UNKNOWN_ERROR: StatusCode = StatusCode::new("UnknownError", 4, H);
pub const SYNTAX_ERROR: StatusCode = StatusCode::new("SyntaxError", 5, E);
pub const INDENTATION_ERROR: StatusCode = StatusCode::new("IndentationError", 6, E);
pub const TAB_ERROR: StatusCode = StatusCode::new("TabError", 7, E);
pub const NAME_ERROR: StatusCode = StatusCode::new("NameError", 8, E);
pub const UNBOUND_LOCAL_ERROR: StatusCode = StatusCode::new("UnboundLocalError", 9, E);
pub const IMPORT_ERROR: StatusCode = StatusCode::new("ImportError", 10, E);
pub const MODULE_NOT_FOUND_ERROR: StatusCode = StatusCode::new("ModuleNotFoundError", 11, E);
pub const EOF_ERROR: StatusCode = StatusCode::new("EOFError", 12, E);
pub const TYPE_ERROR: StatusCode = StatusCode::new("TypeError", 13, E);
pub const VALUE_ERROR: StatusCode = StatusCode::new("ValueError", 14, E);
pub const ATTRIBUTE_ERROR: StatusCode = StatusCode::new("AttributeError", 15, E);
pub const KEY_ERROR: StatusCode = StatusCode::new("KeyError", 16, E);
pub const INDEX_ERROR: StatusCode = StatusCode::new("IndexError", 17, E);
pub const ZERO_DIVISION_ERROR: StatusCode = StatusCode::new("ZeroDivisionError", 18, E);
pub const FILE_NOT_FOUND_ERROR: StatusCode = StatusCode::new("FileNotFoundError", 19, E);
pub const IO_ERROR: StatusCode = StatusCode::new("IOError", 20, E);
pub const OS_ERROR: StatusCode = StatusCode::new("OSError", 21, E);
pub const RUNTIME_ERROR: StatusCode = StatusCode::new("RuntimeError", 22, E);
pub const RECURSION_ERROR: StatusCode = StatusCode::new("RecursionError", 23, E);
pub const MEMORY_ERROR: StatusCode = StatusCode::new("MemoryError", 24, E);
pub const KEYBOARD_INTERRUPT: StatusCode = StatusCode::new("KeyboardInterrupt", 25, E);
pub const SYSTEM_EXIT: StatusCode = StatusCode::new("SystemExit", 26, E);

/// Every status code, indexed by numeric id.
pub static TAXONOMY: [StatusCode; 58] = [
    SUCCESS,
    TIMEOUT,
    SPAWN_ERROR,
    EXIT_CODE_EXCEPTION,
    UNKNOWN_ERROR,
    SYNTAX_ERROR,
    INDENTATION_ERROR,
    TAB_ERROR,
    NAME_ERROR,
    UNBOUND_LOCAL_ERROR,
    IMPORT_ERROR,
    MODULE_NOT_FOUND_ERROR,
    EOF_ERROR,
    TYPE_ERROR,
    VALUE_ERROR,
    ATTRIBUTE_ERROR,
    KEY_ERROR,
    INDEX_ERROR,
    ZERO_DIVISION_ERROR,
    FILE_NOT_FOUND_ERROR,
    IO_ERROR,
    OS_ERROR,
    RUNTIME_ERROR,
    RECURSION_ERROR,
    MEMORY_ERROR,
    KEYBOARD_INTERRUPT,
    SYSTEM_EXIT,
    StatusCode::new("BaseException", 27, E),
    StatusCode::new("Exception", 28, E),
    StatusCode::new("StandardError", 29, E),
    StatusCode::new("StopIteration", 30, E),
    StatusCode::new("ArithmeticError", 31, E),
    StatusCode::new("FloatingPointError", 32, E),
    StatusCode::new("OverflowError", 33, E),
    StatusCode::new("AssertionError", 34, E),
    StatusCode::new("BufferError", 35, E),
    StatusCode::new("LookupError", 36, E),
    StatusCode::new("EnvironmentError", 37, E),
    StatusCode::new("BlockingIOError", 38, E),
    StatusCode::new("ChildProcessError", 39, E),
    StatusCode::new("ConnectionError", 40, E),
    StatusCode::new("BrokenPipeError", 41, E),
    StatusCode::new("ConnectionAbortedError", 42, E),
    StatusCode::new("ConnectionRefusedError", 43, E),
    StatusCode::new("ConnectionResetError", 44, E),
    StatusCode::new("FileExistsError", 45, E),
    StatusCode::new("InterruptedError", 46, E),
    StatusCode::new("IsADirectoryError", 47, E),
    StatusCode::new("NotADirectoryError", 48, E),
    StatusCode::new("PermissionError", 49, E),
    StatusCode::new("ProcessLookupError", 50, E),
    StatusCode::new("TimeoutError", 51, E),
    StatusCode::new("ReferenceError", 52, E),
    StatusCode::new("NotImplementedError", 53, E),
    StatusCode::new("SystemError", 54, E),
    StatusCode::new("UnicodeError", 55, E),
    StatusCode::new("UnicodeDecodeError", 56, E),
    StatusCode::new("UnicodeEncodeError", 57, E),
];
