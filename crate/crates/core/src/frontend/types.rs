//! C types understood by the subset.

use std::fmt;

/// Integer types. Plain `char` is signed on x86-64 and is folded into `Char`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IntKind {
    Char,
    UChar,
    Short,
    UShort,
    Int,
    UInt,
    Long,
    ULong,
}

impl IntKind {
    pub fn size(self) -> u64 {
        match self {
            IntKind::Char | IntKind::UChar => 1,
            IntKind::Short | IntKind::UShort => 2,
            IntKind::Int | IntKind::UInt => 4,
            IntKind::Long | IntKind::ULong => 8,
        }
    }

    pub fn bits(self) -> u32 {
        (self.size() * 8) as u32
    }

    pub fn is_signed(self) -> bool {
        matches!(
            self,
            IntKind::Char | IntKind::Short | IntKind::Int | IntKind::Long
        )
    }

    pub fn rank(self) -> u8 {
        match self {
            IntKind::Char | IntKind::UChar => 1,
            IntKind::Short | IntKind::UShort => 2,
            IntKind::Int | IntKind::UInt => 3,
            IntKind::Long | IntKind::ULong => 4,
        }
    }

    pub fn to_unsigned(self) -> IntKind {
        match self {
            IntKind::Char | IntKind::UChar => IntKind::UChar,
            IntKind::Short | IntKind::UShort => IntKind::UShort,
            IntKind::Int | IntKind::UInt => IntKind::UInt,
            IntKind::Long | IntKind::ULong => IntKind::ULong,
        }
    }

    pub fn min_value(self) -> i128 {
        if self.is_signed() {
            -(1i128 << (self.bits() - 1))
        } else {
            0
        }
    }

    pub fn max_value(self) -> i128 {
        if self.is_signed() {
            (1i128 << (self.bits() - 1)) - 1
        } else {
            (1i128 << self.bits()) - 1
        }
    }

    /// Integer promotion: everything narrower than `int` becomes `int`.
    pub fn promote(self) -> IntKind {
        if self.rank() < 3 {
            IntKind::Int
        } else {
            self
        }
    }

    /// Wraps `value` into the representable range of this kind (two's complement).
    pub fn wrap(self, value: i128) -> i128 {
        let bits = self.bits();
        let mask = (1i128 << bits) - 1;
        let low = value & mask;
        if self.is_signed() && low >> (bits - 1) == 1 {
            low - (1i128 << bits)
        } else {
            low
        }
    }

    pub fn c_name(self) -> &'static str {
        match self {
            IntKind::Char => "char",
            IntKind::UChar => "unsigned char",
            IntKind::Short => "short",
            IntKind::UShort => "unsigned short",
            IntKind::Int => "int",
            IntKind::UInt => "unsigned int",
            IntKind::Long => "long",
            IntKind::ULong => "unsigned long",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RecordKind {
    Struct,
    Union,
}

impl RecordKind {
    pub fn keyword(self) -> &'static str {
        match self {
            RecordKind::Struct => "struct",
            RecordKind::Union => "union",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Void,
    Int(IntKind),
    Float,
    Double,
    Pointer(Box<Type>),
    /// `None` length only appears before an initializer completes the type.
    Array(Box<Type>, Option<u64>),
    Record(RecordKind, String),
}

impl Type {
    pub const INT: Type = Type::Int(IntKind::Int);

    pub fn pointer_to(ty: Type) -> Type {
        Type::Pointer(Box::new(ty))
    }

    pub fn array_of(ty: Type, len: u64) -> Type {
        Type::Array(Box::new(ty), Some(len))
    }

    pub fn is_integer(&self) -> bool {
        matches!(self, Type::Int(_))
    }

    pub fn is_floating(&self) -> bool {
        matches!(self, Type::Float | Type::Double)
    }

    pub fn is_arithmetic(&self) -> bool {
        self.is_integer() || self.is_floating()
    }

    pub fn is_pointer(&self) -> bool {
        matches!(self, Type::Pointer(_))
    }

    pub fn is_scalar(&self) -> bool {
        self.is_arithmetic() || self.is_pointer()
    }

    pub fn is_array(&self) -> bool {
        matches!(self, Type::Array(..))
    }

    pub fn is_record(&self) -> bool {
        matches!(self, Type::Record(..))
    }

    pub fn int_kind(&self) -> Option<IntKind> {
        match self {
            Type::Int(k) => Some(*k),
            _ => None,
        }
    }

    /// Element type for pointers and arrays.
    pub fn pointee(&self) -> Option<&Type> {
        match self {
            Type::Pointer(t) | Type::Array(t, _) => Some(t),
            _ => None,
        }
    }

    /// Array-to-pointer decay; other types are returned unchanged.
    pub fn decay(&self) -> Type {
        match self {
            Type::Array(elem, _) => Type::Pointer(elem.clone()),
            other => other.clone(),
        }
    }

    /// Innermost non-array, non-pointer type (the declaration specifier).
    pub fn base(&self) -> &Type {
        match self {
            Type::Pointer(t) | Type::Array(t, _) => t.base(),
            other => other,
        }
    }

    /// Renders the type as a C declaration of `name` (empty name gives an abstract declarator).
    pub fn declare(&self, name: &str) -> String {
        let mut dims = String::new();
        let mut ty = self;
        while let Type::Array(elem, len) = ty {
            match len {
                Some(n) => dims.push_str(&format!("[{n}]")),
                None => dims.push_str("[]"),
            }
            ty = elem;
        }
        let mut stars = String::new();
        while let Type::Pointer(inner) = ty {
            stars.push('*');
            ty = inner;
        }
        let base = ty.to_string();
        if name.is_empty() && stars.is_empty() && dims.is_empty() {
            return base;
        }
        if name.is_empty() {
            format!("{base} {stars}{dims}")
        } else {
            format!("{base} {stars}{name}{dims}")
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Void => f.write_str("void"),
            Type::Int(k) => f.write_str(k.c_name()),
            Type::Float => f.write_str("float"),
            Type::Double => f.write_str("double"),
            Type::Record(kind, tag) => write!(f, "{} {}", kind.keyword(), tag),
            Type::Pointer(_) | Type::Array(..) => f.write_str(&self.declare("")),
        }
    }
}

/// Usual arithmetic conversions for two arithmetic operand types.
pub fn usual_arithmetic(a: &Type, b: &Type) -> Type {
    if matches!(a, Type::Double) || matches!(b, Type::Double) {
        return Type::Double;
    }
    if matches!(a, Type::Float) || matches!(b, Type::Float) {
        return Type::Float;
    }
    let (Some(x), Some(y)) = (a.int_kind(), b.int_kind()) else {
        return Type::INT;
    };
    Type::Int(common_int(x.promote(), y.promote()))
}

fn common_int(x: IntKind, y: IntKind) -> IntKind {
    if x == y {
        return x;
    }
    if x.is_signed() == y.is_signed() {
        return if x.rank() >= y.rank() { x } else { y };
    }
    let (s, u) = if x.is_signed() { (x, y) } else { (y, x) };
    if u.rank() >= s.rank() {
        u
    } else if s.size() > u.size() {
        s
    } else {
        s.to_unsigned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_matches_twos_complement() {
        assert_eq!(IntKind::Short.wrap(0x56671485), 0x1485);
        assert_eq!(IntKind::Char.wrap(255), -1);
        assert_eq!(IntKind::UInt.wrap(-1), 0xffff_ffff);
        assert_eq!(IntKind::Long.wrap(1i128 << 63), i64::MIN as i128);
    }

    #[test]
    fn arithmetic_conversions() {
        let c = Type::Int(IntKind::Char);
        let u = Type::Int(IntKind::UInt);
        let l = Type::Int(IntKind::Long);
        assert_eq!(usual_arithmetic(&c, &c), Type::INT);
        assert_eq!(usual_arithmetic(&u, &Type::INT), u);
        assert_eq!(usual_arithmetic(&u, &l), l);
        assert_eq!(
            usual_arithmetic(&Type::Int(IntKind::ULong), &l),
            Type::Int(IntKind::ULong)
        );
        assert_eq!(usual_arithmetic(&Type::Float, &l), Type::Float);
        assert_eq!(usual_arithmetic(&Type::Float, &Type::Double), Type::Double);
    }

    #[test]
    fn declarators_render() {
        let t = Type::array_of(Type::pointer_to(Type::INT), 3);
        assert_eq!(t.declare("p"), "int *p[3]");
        assert_eq!(Type::pointer_to(Type::Double).to_string(), "double *");
        let m = Type::array_of(Type::array_of(Type::Int(IntKind::Char), 4), 2);
        assert_eq!(m.declare("m"), "char m[2][4]");
    }
}
