use crate::error::{Error, Result};
use crate::model::Task;
use serde::de::DeserializeOwned;

pub(crate) fn from_json_with_path<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
        path: e.path().to_string(),
        msg: e.inner().to_string(),
    })
}

pub fn dump_task_json(task: &Task) -> String {
    serde_json::to_string_pretty(task).expect("task serialization is infallible")
}

pub fn load_task_json(bytes: &[u8]) -> Result<Task> {
    let task: Task = from_json_with_path(bytes)?;
    task.validate()?;
    Ok(task)
}
