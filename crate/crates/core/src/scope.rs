//! Static name resolution and expression typing.

use crate::ast::*;

#[derive(Clone)]
pub struct Scope<'a> {
    pub class: Option<&'a ClassDecl>,
    locals: Vec<(String, Type)>,
}

impl<'a> Scope<'a> {
    /// Parameters of `method` are in scope; locals are added with [`Scope::declare`].
    pub fn new(class: Option<&'a ClassDecl>, method: Option<&MethodDecl>) -> Scope<'a> {
        let locals = method
            .map(|m| m.params.iter().map(|p| (p.name.clone(), p.ty.clone())).collect())
            .unwrap_or_default();
        Scope { class, locals }
    }

    /// Scope with every local declared anywhere in `body` already visible.
    pub fn of_body(
        class: Option<&'a ClassDecl>,
        method: Option<&MethodDecl>,
        body: &[Stmt],
    ) -> Scope<'a> {
        let mut s = Scope::new(class, method);
        walk_stmts(body, &mut |st| {
            if let StmtKind::Assign { ty: Some(ty), target: Some(x), .. } = &st.kind {
                if s.local(x).is_none() {
                    s.declare(x, ty.clone());
                }
            }
        });
        s
    }

    pub fn declare(&mut self, name: &str, ty: Type) {
        self.locals.push((name.to_string(), ty));
    }

    pub fn local(&self, name: &str) -> Option<&Type> {
        self.locals.iter().rev().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn is_local(&self, name: &str) -> bool {
        self.local(name).is_some()
    }

    pub fn lookup(&self, name: &str) -> Option<Type> {
        self.local(name)
            .cloned()
            .or_else(|| self.class.and_then(|c| c.member_type(name).cloned()))
    }

    pub fn type_of(&self, e: &Expr) -> Option<Type> {
        match &e.kind {
            ExprKind::Num(_) | ExprKind::Now => Some(Type::Real),
            ExprKind::Bool(_) => Some(Type::Bool),
            ExprKind::Null => None,
            ExprKind::This => self.class.map(|c| Type::Class(c.name.clone())),
            ExprKind::Var(v) => self.lookup(v),
            ExprKind::Unary(UnOp::Not, _) => Some(Type::Bool),
            ExprKind::Unary(UnOp::Neg, _) => Some(Type::Real),
            ExprKind::Binary(op, ..) => Some(match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => Type::Real,
                _ => Type::Bool,
            }),
        }
    }

    /// Class name of the receiver of a call.
    pub fn class_of(&self, e: &Expr) -> Option<String> {
        match self.type_of(e)? {
            Type::Class(c) => Some(c),
            _ => None,
        }
    }

    /// The method a call `callee!method(..)` targets, when the receiver's class is known.
    pub fn callee_ref(&self, callee: &Expr, method: &str) -> Option<MethodRef> {
        let class = match &callee.kind {
            ExprKind::This => self.class?.name.clone(),
            _ => self.class_of(callee)?,
        };
        Some(MethodRef::new(&class, method))
    }
}
