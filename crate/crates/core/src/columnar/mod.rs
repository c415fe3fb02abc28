// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Columnar table model: typed columns with validity bitmaps and string
//! offsets, plus the flat buffer encoding used on the wire.

mod bitmap;
mod column;
mod serial;
mod table;

pub use bitmap::Bitmap;
pub use column::{Column, ColumnBuilder, ColumnData, DataType, Value};
pub use serial::{
    deserialize_table, serialize_table, BufferRole, ColumnHeader, SerializedTable, TableHeader,
    MAGIC,
};
pub use table::{canonical_sort, concat_tables, take_rows, Field, Schema, Table};
